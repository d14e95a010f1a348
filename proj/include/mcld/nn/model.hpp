#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mcld/nn/layers.hpp"

namespace mcld::nn {

// Desk-scale stand-ins for the usual CIFAR distillation backbones. All
// families share the same three-stage trunk (widths w, 2w, 4w); resnet and
// wide_resnet use identity-skip blocks, plain_conv uses conv-relu blocks.
struct ModelSpec {
  enum class Family { kPlainConv, kResNet, kWideResNet };

  Family family = Family::kPlainConv;
  int width = 8;        // stage-1 channel count
  int depth = 1;        // blocks per stage
  int num_classes = 10;
  int in_channels = 3;
  int image_h = 16;
  int image_w = 16;

  int feature_dim() const { return width * 4; }
  void validate() const;
};

ModelSpec::Family family_from_string(const std::string& s);
std::string to_string(ModelSpec::Family f);

struct ForwardResult {
  Eigen::MatrixXf features;  // B x feature_dim
  Eigen::MatrixXf logits;    // B x num_classes
};

class Model {
 public:
  Model(const ModelSpec& spec, uint64_t seed);

  const ModelSpec& spec() const { return spec_; }

  // Forward pass; set cache when a backward pass will follow.
  ForwardResult forward(const Tensor4& images, bool cache = false);

  // Backprop from d(loss)/d(logits) through head and trunk, accumulating
  // parameter gradients. Requires a cached forward.
  void backward_from_logits(const Eigen::MatrixXf& dlogits);

  void zero_grads();
  std::vector<ParamView> params();

  void set_frozen(bool frozen) { frozen_ = frozen; }
  bool frozen() const { return frozen_; }

  uint64_t param_checksum() const;
  std::vector<float> serialize_params() const;
  void load_params(const std::vector<float>& flat);

 private:
  ModelSpec spec_;
  std::vector<std::unique_ptr<Layer>> trunk_;
  std::unique_ptr<Linear> head_;
  int trunk_out_c_ = 0, trunk_out_h_ = 0, trunk_out_w_ = 0;
  bool frozen_ = false;
};

// SGD with classic momentum and decoupled-from-nothing L2 weight decay,
// matching the usual CIFAR recipe.
class SgdOptimizer {
 public:
  SgdOptimizer(double lr, double momentum, double weight_decay);

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

  void step(std::vector<ParamView> params);

  const std::vector<std::vector<float>>& velocity() const { return velocity_; }
  void set_velocity(std::vector<std::vector<float>> v) {
    velocity_ = std::move(v);
  }

 private:
  double lr_, momentum_, weight_decay_;
  std::vector<std::vector<float>> velocity_;
};

}  // namespace mcld::nn
