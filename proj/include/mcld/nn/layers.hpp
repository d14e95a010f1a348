#pragma once

#include <memory>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace mcld::nn {

// Dense NCHW batch.
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<float> data;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        data(static_cast<size_t>(n_) * c_ * h_ * w_, 0.0f) {}

  int sample_size() const { return c * h * w; }
  float* sample(int i) { return data.data() + static_cast<size_t>(i) * sample_size(); }
  const float* sample(int i) const {
    return data.data() + static_cast<size_t>(i) * sample_size();
  }
};

// Mutable view of one parameter block and its gradient accumulator.
struct ParamView {
  float* value;
  float* grad;
  long size;
};

class Layer {
 public:
  virtual ~Layer() = default;
  // Caches whatever backward needs when cache is true.
  virtual Tensor4 forward(const Tensor4& x, bool cache) = 0;
  virtual Tensor4 backward(const Tensor4& gy) = 0;
  virtual void collect_params(std::vector<ParamView>& out) {}
  virtual void out_shape(int& c, int& h, int& w) const = 0;
  virtual void zero_grads() {}
};

class Conv2d : public Layer {
 public:
  Conv2d(int in_c, int out_c, int in_h, int in_w, int kernel, int pad,
         std::mt19937_64& rng);

  Tensor4 forward(const Tensor4& x, bool cache) override;
  Tensor4 backward(const Tensor4& gy) override;
  void collect_params(std::vector<ParamView>& out) override;
  void out_shape(int& c, int& h, int& w) const override;
  void zero_grads() override;

 private:
  Eigen::MatrixXf im2col(const float* sample) const;

  int in_c_, out_c_, in_h_, in_w_, k_, pad_;
  Eigen::MatrixXf weight_;   // out_c x (in_c * k * k)
  Eigen::VectorXf bias_;
  Eigen::MatrixXf gweight_;
  Eigen::VectorXf gbias_;
  std::vector<Eigen::MatrixXf> cols_;  // cached im2col per sample
};

class ReLU : public Layer {
 public:
  ReLU(int c, int h, int w) : c_(c), h_(h), w_(w) {}
  Tensor4 forward(const Tensor4& x, bool cache) override;
  Tensor4 backward(const Tensor4& gy) override;
  void out_shape(int& c, int& h, int& w) const override;

 private:
  int c_, h_, w_;
  std::vector<float> cached_in_;
};

// 2x2 average pooling, stride 2.
class AvgPool2 : public Layer {
 public:
  AvgPool2(int c, int h, int w) : c_(c), h_(h), w_(w) {}
  Tensor4 forward(const Tensor4& x, bool cache) override;
  Tensor4 backward(const Tensor4& gy) override;
  void out_shape(int& c, int& h, int& w) const override;

 private:
  int c_, h_, w_;
};

// conv-relu-conv with identity skip, relu on the sum. Channel-preserving.
class ResidualBlock : public Layer {
 public:
  ResidualBlock(int c, int h, int w, std::mt19937_64& rng);
  Tensor4 forward(const Tensor4& x, bool cache) override;
  Tensor4 backward(const Tensor4& gy) override;
  void collect_params(std::vector<ParamView>& out) override;
  void out_shape(int& c, int& h, int& w) const override;
  void zero_grads() override;

 private:
  int c_, h_, w_;
  Conv2d conv1_, conv2_;
  ReLU relu1_;
  std::vector<float> cached_sum_;  // pre-activation of the output
};

class Linear {
 public:
  Linear(int in_dim, int out_dim, std::mt19937_64& rng);

  Eigen::MatrixXf forward(const Eigen::MatrixXf& x, bool cache);
  Eigen::MatrixXf backward(const Eigen::MatrixXf& gy);
  void collect_params(std::vector<ParamView>& out);
  void zero_grads();

  int in_dim() const { return static_cast<int>(weight_.cols()); }
  int out_dim() const { return static_cast<int>(weight_.rows()); }

 private:
  Eigen::MatrixXf weight_;  // out x in
  Eigen::VectorXf bias_;
  Eigen::MatrixXf gweight_;
  Eigen::VectorXf gbias_;
  Eigen::MatrixXf cached_in_;
};

}  // namespace mcld::nn
