#include "mcld/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace mcld::nn {

namespace {

void he_init(Eigen::MatrixXf& w, int fan_in, std::mt19937_64& rng) {
  std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / fan_in));
  for (int i = 0; i < w.rows(); ++i) {
    for (int j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
  }
}

}  // namespace

Conv2d::Conv2d(int in_c, int out_c, int in_h, int in_w, int kernel, int pad,
               std::mt19937_64& rng)
    : in_c_(in_c), out_c_(out_c), in_h_(in_h), in_w_(in_w), k_(kernel),
      pad_(pad) {
  const int fan_in = in_c * kernel * kernel;
  weight_.resize(out_c, fan_in);
  he_init(weight_, fan_in, rng);
  bias_ = Eigen::VectorXf::Zero(out_c);
  gweight_ = Eigen::MatrixXf::Zero(out_c, fan_in);
  gbias_ = Eigen::VectorXf::Zero(out_c);
}

Eigen::MatrixXf Conv2d::im2col(const float* sample) const {
  // Output spatial size equals input (stride 1, pad = k/2 in this project).
  const int oh = in_h_ + 2 * pad_ - k_ + 1;
  const int ow = in_w_ + 2 * pad_ - k_ + 1;
  Eigen::MatrixXf col = Eigen::MatrixXf::Zero(in_c_ * k_ * k_, oh * ow);
  for (int c = 0; c < in_c_; ++c) {
    const float* plane = sample + static_cast<size_t>(c) * in_h_ * in_w_;
    for (int ky = 0; ky < k_; ++ky) {
      for (int kx = 0; kx < k_; ++kx) {
        const int row = (c * k_ + ky) * k_ + kx;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy + ky - pad_;
          if (iy < 0 || iy >= in_h_) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox + kx - pad_;
            if (ix < 0 || ix >= in_w_) continue;
            col(row, oy * ow + ox) = plane[iy * in_w_ + ix];
          }
        }
      }
    }
  }
  return col;
}

Tensor4 Conv2d::forward(const Tensor4& x, bool cache) {
  if (x.c != in_c_ || x.h != in_h_ || x.w != in_w_) {
    throw std::invalid_argument("Conv2d: input shape mismatch");
  }
  const int oh = in_h_ + 2 * pad_ - k_ + 1;
  const int ow = in_w_ + 2 * pad_ - k_ + 1;
  Tensor4 y(x.n, out_c_, oh, ow);
  if (cache) cols_.assign(x.n, Eigen::MatrixXf());
  for (int i = 0; i < x.n; ++i) {
    Eigen::MatrixXf col = im2col(x.sample(i));
    Eigen::MatrixXf prod = weight_ * col;  // out_c x ohw
    prod.colwise() += bias_;
    for (int c = 0; c < out_c_; ++c) {
      Eigen::Map<Eigen::VectorXf>(y.sample(i) + static_cast<size_t>(c) * oh * ow,
                                  oh * ow) = prod.row(c);
    }
    if (cache) cols_[i] = std::move(col);
  }
  return y;
}

Tensor4 Conv2d::backward(const Tensor4& gy) {
  const int oh = gy.h, ow = gy.w;
  Tensor4 gx(gy.n, in_c_, in_h_, in_w_);
  for (int i = 0; i < gy.n; ++i) {
    Eigen::MatrixXf g(out_c_, oh * ow);
    for (int c = 0; c < out_c_; ++c) {
      g.row(c) = Eigen::Map<const Eigen::VectorXf>(
          gy.sample(i) + static_cast<size_t>(c) * oh * ow, oh * ow);
    }
    gweight_.noalias() += g * cols_[i].transpose();
    gbias_ += g.rowwise().sum();
    Eigen::MatrixXf gcol = weight_.transpose() * g;  // (in_c k k) x ohw
    // col2im accumulate
    float* out_sample = gx.sample(i);
    for (int c = 0; c < in_c_; ++c) {
      float* plane = out_sample + static_cast<size_t>(c) * in_h_ * in_w_;
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          const int row = (c * k_ + ky) * k_ + kx;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy + ky - pad_;
            if (iy < 0 || iy >= in_h_) continue;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox + kx - pad_;
              if (ix < 0 || ix >= in_w_) continue;
              plane[iy * in_w_ + ix] += gcol(row, oy * ow + ox);
            }
          }
        }
      }
    }
  }
  return gx;
}

void Conv2d::collect_params(std::vector<ParamView>& out) {
  out.push_back({weight_.data(), gweight_.data(),
                 static_cast<long>(weight_.size())});
  out.push_back({bias_.data(), gbias_.data(), static_cast<long>(bias_.size())});
}

void Conv2d::out_shape(int& c, int& h, int& w) const {
  c = out_c_;
  h = in_h_ + 2 * pad_ - k_ + 1;
  w = in_w_ + 2 * pad_ - k_ + 1;
}

void Conv2d::zero_grads() {
  gweight_.setZero();
  gbias_.setZero();
}

Tensor4 ReLU::forward(const Tensor4& x, bool cache) {
  Tensor4 y = x;
  for (float& v : y.data) v = v > 0.0f ? v : 0.0f;
  if (cache) cached_in_ = x.data;
  return y;
}

Tensor4 ReLU::backward(const Tensor4& gy) {
  Tensor4 gx = gy;
  for (size_t i = 0; i < gx.data.size(); ++i) {
    if (cached_in_[i] <= 0.0f) gx.data[i] = 0.0f;
  }
  return gx;
}

void ReLU::out_shape(int& c, int& h, int& w) const {
  c = c_;
  h = h_;
  w = w_;
}

Tensor4 AvgPool2::forward(const Tensor4& x, bool /*cache*/) {
  const int oh = h_ / 2, ow = w_ / 2;
  Tensor4 y(x.n, c_, oh, ow);
  for (int i = 0; i < x.n; ++i) {
    const float* in = x.sample(i);
    float* out = y.sample(i);
    for (int c = 0; c < c_; ++c) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          const int base = c * h_ * w_ + 2 * oy * w_ + 2 * ox;
          out[c * oh * ow + oy * ow + ox] =
              0.25f * (in[base] + in[base + 1] + in[base + w_] +
                       in[base + w_ + 1]);
        }
      }
    }
  }
  return y;
}

Tensor4 AvgPool2::backward(const Tensor4& gy) {
  const int oh = h_ / 2, ow = w_ / 2;
  Tensor4 gx(gy.n, c_, h_, w_);
  for (int i = 0; i < gy.n; ++i) {
    const float* g = gy.sample(i);
    float* out = gx.sample(i);
    for (int c = 0; c < c_; ++c) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          const float v = 0.25f * g[c * oh * ow + oy * ow + ox];
          const int base = c * h_ * w_ + 2 * oy * w_ + 2 * ox;
          out[base] += v;
          out[base + 1] += v;
          out[base + w_] += v;
          out[base + w_ + 1] += v;
        }
      }
    }
  }
  return gx;
}

void AvgPool2::out_shape(int& c, int& h, int& w) const {
  c = c_;
  h = h_ / 2;
  w = w_ / 2;
}

ResidualBlock::ResidualBlock(int c, int h, int w, std::mt19937_64& rng)
    : c_(c), h_(h), w_(w),
      conv1_(c, c, h, w, 3, 1, rng),
      conv2_(c, c, h, w, 3, 1, rng),
      relu1_(c, h, w) {}

Tensor4 ResidualBlock::forward(const Tensor4& x, bool cache) {
  Tensor4 h1 = relu1_.forward(conv1_.forward(x, cache), cache);
  Tensor4 sum = conv2_.forward(h1, cache);
  for (size_t i = 0; i < sum.data.size(); ++i) sum.data[i] += x.data[i];
  if (cache) cached_sum_ = sum.data;
  Tensor4 y = sum;
  for (float& v : y.data) v = v > 0.0f ? v : 0.0f;
  return y;
}

Tensor4 ResidualBlock::backward(const Tensor4& gy) {
  Tensor4 gsum = gy;
  for (size_t i = 0; i < gsum.data.size(); ++i) {
    if (cached_sum_[i] <= 0.0f) gsum.data[i] = 0.0f;
  }
  Tensor4 gx = conv1_.backward(relu1_.backward(conv2_.backward(gsum)));
  for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += gsum.data[i];
  return gx;
}

void ResidualBlock::collect_params(std::vector<ParamView>& out) {
  conv1_.collect_params(out);
  conv2_.collect_params(out);
}

void ResidualBlock::out_shape(int& c, int& h, int& w) const {
  c = c_;
  h = h_;
  w = w_;
}

void ResidualBlock::zero_grads() {
  conv1_.zero_grads();
  conv2_.zero_grads();
}

Linear::Linear(int in_dim, int out_dim, std::mt19937_64& rng) {
  weight_.resize(out_dim, in_dim);
  // No nonlinearity follows the head, so use the smaller fan-in scale.
  std::normal_distribution<float> dist(0.0f, std::sqrt(1.0f / in_dim));
  for (int i = 0; i < weight_.rows(); ++i) {
    for (int j = 0; j < weight_.cols(); ++j) weight_(i, j) = dist(rng);
  }
  bias_ = Eigen::VectorXf::Zero(out_dim);
  gweight_ = Eigen::MatrixXf::Zero(out_dim, in_dim);
  gbias_ = Eigen::VectorXf::Zero(out_dim);
}

Eigen::MatrixXf Linear::forward(const Eigen::MatrixXf& x, bool cache) {
  if (cache) cached_in_ = x;
  Eigen::MatrixXf y = x * weight_.transpose();
  y.rowwise() += bias_.transpose();
  return y;
}

Eigen::MatrixXf Linear::backward(const Eigen::MatrixXf& gy) {
  gweight_.noalias() += gy.transpose() * cached_in_;
  gbias_ += gy.colwise().sum();
  return gy * weight_;
}

void Linear::collect_params(std::vector<ParamView>& out) {
  out.push_back({weight_.data(), gweight_.data(),
                 static_cast<long>(weight_.size())});
  out.push_back({bias_.data(), gbias_.data(), static_cast<long>(bias_.size())});
}

void Linear::zero_grads() {
  gweight_.setZero();
  gbias_.setZero();
}

}  // namespace mcld::nn
