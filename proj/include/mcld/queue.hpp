#pragma once

#include <Eigen/Dense>

#include "mcld/logit_batch.hpp"

namespace mcld {

// FIFO ring of recent teacher logit vectors, the negative pool for the
// instance-wise loss. Paired with a TargetMaskQueue holding the matching
// labels; both must be advanced together through enqueue().
class ProductQueue {
 public:
  ProductQueue(int capacity, int width);

  int capacity() const { return capacity_; }
  int width() const { return width_; }
  int fill_count() const { return fill_; }
  int write_cursor() const { return cursor_; }

  // Filled rows in arrival order (oldest first), fill_count x width.
  Eigen::MatrixXd filled() const;

  void push_row(const Eigen::VectorXd& row);

 private:
  Eigen::MatrixXd entries_;  // capacity x width ring storage
  int capacity_;
  int width_;
  int cursor_ = 0;
  int fill_ = 0;
};

// Labels parallel to the ProductQueue rows, same ring discipline.
class TargetMaskQueue {
 public:
  explicit TargetMaskQueue(int capacity);

  int capacity() const { return capacity_; }
  int fill_count() const { return fill_; }
  int write_cursor() const { return cursor_; }

  // Filled labels in arrival order, parallel to ProductQueue::filled().
  Eigen::VectorXi filled() const;

  void push_label(int label);

 private:
  Eigen::VectorXi labels_;
  int capacity_;
  int cursor_ = 0;
  int fill_ = 0;
};

// Appends every row/label of `teacher` to both queues, evicting oldest
// entries once capacity is reached. Throws on width mismatch or if the two
// queues are out of sync.
void enqueue(ProductQueue& queue, TargetMaskQueue& mask_queue,
             const LogitBatch& teacher);

}  // namespace mcld
