#include "mcld/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mcld/util/hash.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mcld {

std::string to_hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace mcld

namespace mcld::data {

void DatasetSpec::validate() const {
  if (num_classes < 2) throw std::invalid_argument("DatasetSpec: num_classes < 2");
  if (channels < 1 || image_h < 4 || image_w < 4) {
    throw std::invalid_argument("DatasetSpec: invalid image shape");
  }
  if (source == Source::kSynthetic &&
      (train_per_class < 1 || test_per_class < 1)) {
    throw std::invalid_argument("DatasetSpec: per-class counts must be >= 1");
  }
  if (source != Source::kSynthetic && path.empty()) {
    throw std::invalid_argument("DatasetSpec: stored dataset needs a path");
  }
}

DatasetSpec::Source source_from_string(const std::string& s) {
  if (s == "cifar_binary_dir") return DatasetSpec::Source::kCifarBinaryDir;
  if (s == "image_folder") return DatasetSpec::Source::kImageFolder;
  if (s == "synthetic") return DatasetSpec::Source::kSynthetic;
  throw std::invalid_argument("unknown dataset source: " + s);
}

std::string to_string(DatasetSpec::Source s) {
  switch (s) {
    case DatasetSpec::Source::kCifarBinaryDir: return "cifar_binary_dir";
    case DatasetSpec::Source::kImageFolder: return "image_folder";
    case DatasetSpec::Source::kSynthetic: return "synthetic";
  }
  return "?";
}

namespace {

// Low-frequency class template in [-1, 1], one plane per channel.
std::vector<float> class_template(const DatasetSpec& spec, int cls) {
  std::mt19937_64 rng(spec.seed * 0x9E3779B97F4A7C15ull + 0xC0FFEEull + cls);
  std::uniform_real_distribution<float> amp(0.5f, 1.0f);
  std::uniform_int_distribution<int> freq(1, 3);
  std::uniform_real_distribution<float> phase(0.0f, 2.0f * std::numbers::pi_v<float>);

  std::uniform_real_distribution<float> offset(-1.0f, 1.0f);

  const int plane = spec.image_h * spec.image_w;
  std::vector<float> t(static_cast<size_t>(spec.channels) * plane, 0.0f);
  for (int ch = 0; ch < spec.channels; ++ch) {
    // Per-channel class offset so the signal survives spatial pooling.
    const float dc = offset(rng);
    for (int p = 0; p < plane; ++p) t[ch * plane + p] = dc;
    for (int wave = 0; wave < 3; ++wave) {
      const float a = amp(rng);
      const float fx = static_cast<float>(freq(rng));
      const float fy = static_cast<float>(freq(rng));
      const float ph = phase(rng);
      for (int y = 0; y < spec.image_h; ++y) {
        for (int x = 0; x < spec.image_w; ++x) {
          const float arg = 2.0f * std::numbers::pi_v<float> *
                                (fx * x / spec.image_w + fy * y / spec.image_h) +
                            ph;
          t[ch * plane + y * spec.image_w + x] += a * std::cos(arg);
        }
      }
    }
  }
  float peak = 1e-6f;
  for (float v : t) peak = std::max(peak, std::abs(v));
  for (float& v : t) v /= peak;
  return t;
}

uint8_t to_byte(float v) {
  v = std::clamp(v, 0.0f, 1.0f);
  return static_cast<uint8_t>(std::lround(v * 255.0f));
}

void write_records(const Dataset& ds, const fs::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  const int rb = ds.record_bytes();
  for (int i = 0; i < ds.size(); ++i) {
    const auto label = static_cast<uint8_t>(ds.labels[i]);
    out.write(reinterpret_cast<const char*>(&label), 1);
    out.write(reinterpret_cast<const char*>(ds.pixels.data() +
                                            static_cast<size_t>(i) * rb),
              rb);
  }
}

std::vector<uint8_t> read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Dataset parse_records(const std::vector<uint8_t>& bytes, const DatasetSpec& spec) {
  Dataset ds;
  ds.num_classes = spec.num_classes;
  ds.channels = spec.channels;
  ds.h = spec.image_h;
  ds.w = spec.image_w;
  const size_t rb = static_cast<size_t>(ds.record_bytes());
  if (bytes.size() % (rb + 1) != 0) {
    throw std::runtime_error("binary dataset size is not a whole record count");
  }
  const size_t n = bytes.size() / (rb + 1);
  ds.labels.reserve(n);
  ds.pixels.reserve(n * rb);
  for (size_t i = 0; i < n; ++i) {
    const uint8_t* rec = bytes.data() + i * (rb + 1);
    if (rec[0] >= spec.num_classes) {
      throw std::runtime_error("record label out of range");
    }
    ds.labels.push_back(rec[0]);
    ds.pixels.insert(ds.pixels.end(), rec + 1, rec + 1 + rb);
  }
  return ds;
}

Dataset load_image_folder(const DatasetSpec& spec, const std::string& split);

}  // namespace

Dataset synthesize_split(const DatasetSpec& spec, const std::string& split) {
  spec.validate();
  const bool train = (split == "train");
  if (!train && split != "test") {
    throw std::invalid_argument("unknown split: " + split);
  }
  const int per_class = train ? spec.train_per_class : spec.test_per_class;
  const int plane = spec.image_h * spec.image_w;
  const int rb = spec.channels * plane;

  Dataset ds;
  ds.num_classes = spec.num_classes;
  ds.channels = spec.channels;
  ds.h = spec.image_h;
  ds.w = spec.image_w;
  ds.pixels.resize(static_cast<size_t>(spec.num_classes) * per_class * rb);
  ds.labels.resize(static_cast<size_t>(spec.num_classes) * per_class);

  // Distinct noise streams for train and test keep the splits disjoint.
  std::mt19937_64 rng(spec.seed * 0x2545F4914F6CDD1Dull + (train ? 1 : 2));
  std::normal_distribution<float> noise(0.0f, static_cast<float>(spec.noise_sigma));

  int rec = 0;
  for (int cls = 0; cls < spec.num_classes; ++cls) {
    const std::vector<float> tmpl = class_template(spec, cls);
    for (int s = 0; s < per_class; ++s, ++rec) {
      ds.labels[rec] = cls;
      uint8_t* px = ds.pixels.data() + static_cast<size_t>(rec) * rb;
      for (int p = 0; p < rb; ++p) {
        const float v = 0.5f + static_cast<float>(spec.signal_amplitude) * tmpl[p] +
                        noise(rng);
        px[p] = to_byte(v);
      }
    }
  }
  return ds;
}

void synthesize_dataset(const DatasetSpec& spec, const std::string& out_dir) {
  spec.validate();
  fs::create_directories(out_dir);
  const Dataset train = synthesize_split(spec, "train");
  const Dataset test = synthesize_split(spec, "test");
  write_records(train, fs::path(out_dir) / "train.bin");
  write_records(test, fs::path(out_dir) / "test.bin");

  json manifest;
  manifest["format_version"] = 1;
  manifest["num_classes"] = spec.num_classes;
  manifest["channels"] = spec.channels;
  manifest["image_h"] = spec.image_h;
  manifest["image_w"] = spec.image_w;
  for (const std::string split : {"train", "test"}) {
    const fs::path file = fs::path(out_dir) / (split + ".bin");
    const std::vector<uint8_t> bytes = read_file(file);
    manifest["splits"][split] = {
        {"file", split + ".bin"},
        {"count", split == "train" ? train.size() : test.size()},
        {"checksum_fnv1a64", to_hex(fnv1a64(bytes.data(), bytes.size()))},
    };
  }
  std::ofstream mf(fs::path(out_dir) / "manifest.json");
  mf << manifest.dump(2) << "\n";
}

namespace {

Dataset load_cifar_binary(const DatasetSpec& spec, const std::string& split) {
  DatasetSpec effective = spec;
  const fs::path dir(spec.path);
  fs::path file = dir / (split + ".bin");
  const fs::path manifest_path = dir / "manifest.json";
  if (fs::exists(manifest_path)) {
    const std::vector<uint8_t> mbytes = read_file(manifest_path);
    json manifest = json::parse(mbytes.begin(), mbytes.end());
    effective.num_classes = manifest["num_classes"];
    effective.channels = manifest["channels"];
    effective.image_h = manifest["image_h"];
    effective.image_w = manifest["image_w"];
    const auto& entry = manifest["splits"].at(split);
    file = dir / entry["file"].get<std::string>();
    const std::vector<uint8_t> bytes = read_file(file);
    const std::string expect = entry["checksum_fnv1a64"];
    if (to_hex(fnv1a64(bytes.data(), bytes.size())) != expect) {
      throw std::runtime_error("dataset checksum mismatch for " + file.string());
    }
    Dataset ds = parse_records(bytes, effective);
    if (ds.size() != entry["count"].get<int>()) {
      throw std::runtime_error("dataset count mismatch for " + file.string());
    }
    return ds;
  }
  return parse_records(read_file(file), effective);
}

// Class-named subdirectories of binary PPM (P6) images.
Dataset load_image_folder(const DatasetSpec& spec, const std::string& split) {
  const fs::path dir = fs::path(spec.path) / split;
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("image folder split missing: " + dir.string());
  }
  std::vector<std::string> class_names;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) class_names.push_back(e.path().filename().string());
  }
  std::sort(class_names.begin(), class_names.end());
  if (static_cast<int>(class_names.size()) != spec.num_classes) {
    throw std::runtime_error("image folder class count mismatch");
  }

  Dataset ds;
  ds.num_classes = spec.num_classes;
  ds.channels = 3;
  ds.h = spec.image_h;
  ds.w = spec.image_w;
  for (int cls = 0; cls < spec.num_classes; ++cls) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir / class_names[cls])) {
      if (e.path().extension() == ".ppm") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      std::ifstream in(f, std::ios::binary);
      std::string magic;
      int w, h, maxval;
      in >> magic >> w >> h >> maxval;
      in.get();
      if (magic != "P6" || w != spec.image_w || h != spec.image_h ||
          maxval != 255) {
        throw std::runtime_error("unsupported image: " + f.string());
      }
      std::vector<uint8_t> rgb(static_cast<size_t>(w) * h * 3);
      in.read(reinterpret_cast<char*>(rgb.data()), rgb.size());
      // interleaved RGB -> planes
      for (int ch = 0; ch < 3; ++ch) {
        for (int p = 0; p < w * h; ++p) {
          ds.pixels.push_back(rgb[static_cast<size_t>(p) * 3 + ch]);
        }
      }
      ds.labels.push_back(cls);
    }
  }
  return ds;
}

}  // namespace

Dataset load_split(const DatasetSpec& spec, const std::string& split) {
  spec.validate();
  switch (spec.source) {
    case DatasetSpec::Source::kSynthetic:
      if (spec.path.empty()) return synthesize_split(spec, split);
      return load_cifar_binary(spec, split);
    case DatasetSpec::Source::kCifarBinaryDir:
      return load_cifar_binary(spec, split);
    case DatasetSpec::Source::kImageFolder:
      return load_image_folder(spec, split);
  }
  throw std::logic_error("unreachable");
}

std::vector<std::vector<int>> epoch_batches(int n, int batch_size,
                                            uint64_t seed, int epoch) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + epoch + 1);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<int>> batches;
  for (int start = 0; start < n; start += batch_size) {
    const int end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

nn::Tensor4 make_batch(const Dataset& ds, const std::vector<int>& indices,
                       const AugmentFlags& augment, std::mt19937_64* aug_rng) {
  if ((augment.crop || augment.flip) && aug_rng == nullptr) {
    throw std::invalid_argument("make_batch: augmentation needs an RNG");
  }
  const int b = static_cast<int>(indices.size());
  nn::Tensor4 out(b, ds.channels, ds.h, ds.w);
  const int plane = ds.h * ds.w;
  constexpr int kPad = 4;

  for (int i = 0; i < b; ++i) {
    const int idx = indices[i];
    if (idx < 0 || idx >= ds.size()) {
      throw std::out_of_range("make_batch: index out of range");
    }
    const uint8_t* px =
        ds.pixels.data() + static_cast<size_t>(idx) * ds.record_bytes();

    int dy = 0, dx = 0;
    bool mirror = false;
    if (augment.crop) {
      dy = static_cast<int>((*aug_rng)() % (2 * kPad + 1)) - kPad;
      dx = static_cast<int>((*aug_rng)() % (2 * kPad + 1)) - kPad;
    }
    if (augment.flip) mirror = ((*aug_rng)() % 2) == 1;

    float* sample = out.sample(i);
    for (int ch = 0; ch < ds.channels; ++ch) {
      for (int y = 0; y < ds.h; ++y) {
        for (int x = 0; x < ds.w; ++x) {
          const int sx = mirror ? ds.w - 1 - x : x;
          const int iy = y + dy, ix = sx + dx;
          float v = 0.0f;
          if (iy >= 0 && iy < ds.h && ix >= 0 && ix < ds.w) {
            v = px[ch * plane + iy * ds.w + ix] / 255.0f;
          }
          if (augment.normalize) v = (v - 0.5f) / 0.25f;
          sample[ch * plane + y * ds.w + x] = v;
        }
      }
    }
  }
  return out;
}

}  // namespace mcld::data
