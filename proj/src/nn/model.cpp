#include "mcld/nn/model.hpp"

#include <stdexcept>

namespace mcld::nn {

void ModelSpec::validate() const {
  if (width < 1 || depth < 0 || num_classes < 2 || in_channels < 1 ||
      image_h < 4 || image_w < 4) {
    throw std::invalid_argument("ModelSpec: invalid dimensions");
  }
  if (image_h % 4 != 0 || image_w % 4 != 0) {
    throw std::invalid_argument("ModelSpec: image size must be divisible by 4");
  }
}

ModelSpec::Family family_from_string(const std::string& s) {
  if (s == "plain_conv") return ModelSpec::Family::kPlainConv;
  if (s == "resnet") return ModelSpec::Family::kResNet;
  if (s == "wide_resnet") return ModelSpec::Family::kWideResNet;
  throw std::invalid_argument("unknown architecture_id: " + s);
}

std::string to_string(ModelSpec::Family f) {
  switch (f) {
    case ModelSpec::Family::kPlainConv: return "plain_conv";
    case ModelSpec::Family::kResNet: return "resnet";
    case ModelSpec::Family::kWideResNet: return "wide_resnet";
  }
  return "?";
}

Model::Model(const ModelSpec& spec, uint64_t seed) : spec_(spec) {
  spec.validate();
  std::mt19937_64 rng(seed);
  const bool residual = spec.family != ModelSpec::Family::kPlainConv;

  int c = spec.in_channels, h = spec.image_h, w = spec.image_w;
  auto add_conv_relu = [&](int out_c) {
    trunk_.push_back(std::make_unique<Conv2d>(c, out_c, h, w, 3, 1, rng));
    c = out_c;
    trunk_.push_back(std::make_unique<ReLU>(c, h, w));
  };
  auto add_blocks = [&]() {
    for (int d = 0; d < spec.depth; ++d) {
      if (residual) {
        trunk_.push_back(std::make_unique<ResidualBlock>(c, h, w, rng));
      } else {
        add_conv_relu(c);
      }
    }
  };
  auto add_pool = [&]() {
    trunk_.push_back(std::make_unique<AvgPool2>(c, h, w));
    h /= 2;
    w /= 2;
  };

  add_conv_relu(spec.width);   // stem
  add_blocks();                // stage 1 @ w
  add_pool();
  add_conv_relu(spec.width * 2);
  add_blocks();                // stage 2 @ 2w
  add_pool();
  add_conv_relu(spec.width * 4);
  add_blocks();                // stage 3 @ 4w
  trunk_out_c_ = c;
  trunk_out_h_ = h;
  trunk_out_w_ = w;

  head_ = std::make_unique<Linear>(spec.feature_dim(), spec.num_classes, rng);
}

ForwardResult Model::forward(const Tensor4& images, bool cache) {
  if (images.c != spec_.in_channels || images.h != spec_.image_h ||
      images.w != spec_.image_w) {
    throw std::invalid_argument("Model::forward: input shape mismatch");
  }
  Tensor4 x = images;
  for (auto& layer : trunk_) x = layer->forward(x, cache);

  // Global average pool to the penultimate features.
  const int fdim = trunk_out_c_;
  const int spatial = trunk_out_h_ * trunk_out_w_;
  const float pool_scale = static_cast<float>(spatial);
  ForwardResult out;
  out.features.resize(images.n, fdim);
  for (int i = 0; i < images.n; ++i) {
    const float* s = x.sample(i);
    for (int ch = 0; ch < fdim; ++ch) {
      float acc = 0.0f;
      for (int p = 0; p < spatial; ++p) acc += s[ch * spatial + p];
      out.features(i, ch) = acc / pool_scale;
    }
  }
  out.logits = head_->forward(out.features, cache);
  return out;
}

void Model::backward_from_logits(const Eigen::MatrixXf& dlogits) {
  if (frozen_) throw std::logic_error("Model: backward on a frozen model");
  Eigen::MatrixXf gfeat = head_->backward(dlogits);

  const int spatial = trunk_out_h_ * trunk_out_w_;
  const float pool_scale = static_cast<float>(spatial);
  Tensor4 gx(static_cast<int>(gfeat.rows()), trunk_out_c_, trunk_out_h_,
             trunk_out_w_);
  for (int i = 0; i < gx.n; ++i) {
    float* s = gx.sample(i);
    for (int ch = 0; ch < trunk_out_c_; ++ch) {
      const float v = gfeat(i, ch) / pool_scale;
      for (int p = 0; p < spatial; ++p) s[ch * spatial + p] = v;
    }
  }
  for (auto it = trunk_.rbegin(); it != trunk_.rend(); ++it) {
    gx = (*it)->backward(gx);
  }
}

void Model::zero_grads() {
  for (auto& layer : trunk_) layer->zero_grads();
  head_->zero_grads();
}

std::vector<ParamView> Model::params() {
  std::vector<ParamView> out;
  for (auto& layer : trunk_) layer->collect_params(out);
  head_->collect_params(out);
  return out;
}

uint64_t Model::param_checksum() const {
  // FNV-1a over the serialized parameter bytes.
  std::vector<float> flat = serialize_params();
  const auto* bytes = reinterpret_cast<const unsigned char*>(flat.data());
  uint64_t hash = 1469598103934665603ull;
  for (size_t i = 0; i < flat.size() * sizeof(float); ++i) {
    hash ^= bytes[i];
    hash *= 1099511628211ull;
  }
  return hash;
}

std::vector<float> Model::serialize_params() const {
  std::vector<float> flat;
  for (const ParamView& p : const_cast<Model*>(this)->params()) {
    flat.insert(flat.end(), p.value, p.value + p.size);
  }
  return flat;
}

void Model::load_params(const std::vector<float>& flat) {
  size_t offset = 0;
  for (ParamView& p : params()) {
    if (offset + p.size > flat.size()) {
      throw std::invalid_argument("Model: parameter blob too small");
    }
    std::copy(flat.begin() + offset, flat.begin() + offset + p.size, p.value);
    offset += p.size;
  }
  if (offset != flat.size()) {
    throw std::invalid_argument("Model: parameter blob size mismatch");
  }
}

SgdOptimizer::SgdOptimizer(double lr, double momentum, double weight_decay)
    : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {}

void SgdOptimizer::step(std::vector<ParamView> params) {
  if (velocity_.empty()) {
    for (const ParamView& p : params) {
      velocity_.emplace_back(p.size, 0.0f);
    }
  }
  if (velocity_.size() != params.size()) {
    throw std::logic_error("SgdOptimizer: parameter set changed");
  }
  for (size_t b = 0; b < params.size(); ++b) {
    ParamView& p = params[b];
    std::vector<float>& v = velocity_[b];
    for (long i = 0; i < p.size; ++i) {
      const float g = p.grad[i] + static_cast<float>(weight_decay_) * p.value[i];
      v[i] = static_cast<float>(momentum_) * v[i] + g;
      p.value[i] -= static_cast<float>(lr_) * v[i];
    }
  }
}

}  // namespace mcld::nn
