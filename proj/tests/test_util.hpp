#pragma once

#include <random>
#include <vector>

#include "mcld/logit_batch.hpp"
#include "oracle.hpp"

namespace testutil {

inline mcld::LogitBatch random_batch(std::mt19937_64& rng, int b, int c,
                                     double scale = 2.0) {
  std::uniform_real_distribution<double> val(-scale, scale);
  std::uniform_int_distribution<int> lab(0, c - 1);
  mcld::LogitBatch out;
  out.values.resize(b, c);
  out.labels.resize(b);
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < c; ++j) out.values(i, j) = val(rng);
    out.labels[i] = lab(rng);
  }
  return out;
}

inline oracle::Mat to_oracle(const Eigen::MatrixXd& m) {
  oracle::Mat out(m.rows(), oracle::Vec(m.cols()));
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  }
  return out;
}

inline std::vector<int> to_vector(const Eigen::VectorXi& v) {
  return std::vector<int>(v.data(), v.data() + v.size());
}

}  // namespace testutil
