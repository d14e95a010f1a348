#pragma once

#include <Eigen/Dense>

namespace mcld {

/// A batch of raw (pre-softmax) class scores with aligned ground-truth labels.
/// Row i of `values` and entry i of `labels` refer to the same sample.
struct LogitBatch {
  Eigen::MatrixXd values;  // B x C
  Eigen::VectorXi labels;  // B, each in [0, C)

  int batch_size() const { return static_cast<int>(values.rows()); }
  int num_classes() const { return static_cast<int>(values.cols()); }

  // Throws std::invalid_argument on non-finite values, label/row count
  // mismatch, out-of-range labels, B < 1 or C < 2.
  void validate() const;
};

// Checks that two batches have identical shape and row-aligned labels.
void check_aligned(const LogitBatch& student, const LogitBatch& teacher);

}  // namespace mcld
