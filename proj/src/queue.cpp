#include "mcld/queue.hpp"

#include <stdexcept>

namespace mcld {

ProductQueue::ProductQueue(int capacity, int width)
    : entries_(capacity, width), capacity_(capacity), width_(width) {
  if (capacity < 1) throw std::invalid_argument("queue capacity must be >= 1");
  if (width < 1) throw std::invalid_argument("queue width must be >= 1");
  entries_.setZero();
}

Eigen::MatrixXd ProductQueue::filled() const {
  Eigen::MatrixXd out(fill_, width_);
  // Oldest entry sits at cursor_ once the ring has wrapped, at 0 before.
  const int start = (fill_ == capacity_) ? cursor_ : 0;
  for (int j = 0; j < fill_; ++j) {
    out.row(j) = entries_.row((start + j) % capacity_);
  }
  return out;
}

void ProductQueue::push_row(const Eigen::VectorXd& row) {
  if (row.size() != width_) {
    throw std::invalid_argument("ProductQueue: row width mismatch");
  }
  if (!row.allFinite()) {
    throw std::invalid_argument("ProductQueue: non-finite row");
  }
  entries_.row(cursor_) = row;
  cursor_ = (cursor_ + 1) % capacity_;
  if (fill_ < capacity_) ++fill_;
}

TargetMaskQueue::TargetMaskQueue(int capacity)
    : labels_(capacity), capacity_(capacity) {
  if (capacity < 1) throw std::invalid_argument("queue capacity must be >= 1");
  labels_.setZero();
}

Eigen::VectorXi TargetMaskQueue::filled() const {
  Eigen::VectorXi out(fill_);
  const int start = (fill_ == capacity_) ? cursor_ : 0;
  for (int j = 0; j < fill_; ++j) {
    out[j] = labels_[(start + j) % capacity_];
  }
  return out;
}

void TargetMaskQueue::push_label(int label) {
  labels_[cursor_] = label;
  cursor_ = (cursor_ + 1) % capacity_;
  if (fill_ < capacity_) ++fill_;
}

void enqueue(ProductQueue& queue, TargetMaskQueue& mask_queue,
             const LogitBatch& teacher) {
  teacher.validate();
  if (teacher.num_classes() != queue.width()) {
    throw std::invalid_argument("enqueue: teacher width does not match queue");
  }
  if (queue.capacity() != mask_queue.capacity() ||
      queue.fill_count() != mask_queue.fill_count() ||
      queue.write_cursor() != mask_queue.write_cursor()) {
    throw std::logic_error("enqueue: product/mask queues out of sync");
  }
  for (int i = 0; i < teacher.batch_size(); ++i) {
    queue.push_row(teacher.values.row(i));
    mask_queue.push_label(teacher.labels[i]);
  }
}

}  // namespace mcld
