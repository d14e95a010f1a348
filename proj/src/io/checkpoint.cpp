#include "mcld/io/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mcld::io {

namespace {

constexpr char kMagic[8] = {'M', 'C', 'L', 'D', 'C', 'K', 'P', '1'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T* v) {
  in.read(reinterpret_cast<char*>(v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint truncated");
}

}  // namespace

void save_checkpoint(const std::string& path, const nn::Model& model,
                     uint64_t config_fingerprint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, uint32_t{1});
  write_pod(out, config_fingerprint);
  const nn::ModelSpec& s = model.spec();
  write_pod(out, static_cast<int32_t>(s.family));
  write_pod(out, static_cast<int32_t>(s.width));
  write_pod(out, static_cast<int32_t>(s.depth));
  write_pod(out, static_cast<int32_t>(s.num_classes));
  write_pod(out, static_cast<int32_t>(s.in_channels));
  write_pod(out, static_cast<int32_t>(s.image_h));
  write_pod(out, static_cast<int32_t>(s.image_w));
  const std::vector<float> params = model.serialize_params();
  write_pod(out, static_cast<uint64_t>(params.size()));
  out.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(params.size() * sizeof(float)));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path);
  }
  Checkpoint ckpt;
  read_pod(in, &ckpt.format_version);
  if (ckpt.format_version != 1) {
    throw std::runtime_error("unsupported checkpoint version");
  }
  read_pod(in, &ckpt.config_fingerprint);
  int32_t family, width, depth, classes, in_ch, h, w;
  read_pod(in, &family);
  read_pod(in, &width);
  read_pod(in, &depth);
  read_pod(in, &classes);
  read_pod(in, &in_ch);
  read_pod(in, &h);
  read_pod(in, &w);
  ckpt.spec.family = static_cast<nn::ModelSpec::Family>(family);
  ckpt.spec.width = width;
  ckpt.spec.depth = depth;
  ckpt.spec.num_classes = classes;
  ckpt.spec.in_channels = in_ch;
  ckpt.spec.image_h = h;
  ckpt.spec.image_w = w;
  uint64_t count;
  read_pod(in, &count);
  ckpt.params.resize(count);
  in.read(reinterpret_cast<char*>(ckpt.params.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (!in) throw std::runtime_error("checkpoint truncated");
  return ckpt;
}

nn::Model model_from_checkpoint(const Checkpoint& ckpt) {
  nn::Model model(ckpt.spec, 0);
  model.load_params(ckpt.params);
  return model;
}

}  // namespace mcld::io
