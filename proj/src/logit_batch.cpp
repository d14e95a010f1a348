#include "mcld/logit_batch.hpp"

#include <stdexcept>
#include <string>

namespace mcld {

void LogitBatch::validate() const {
  if (values.rows() < 1) {
    throw std::invalid_argument("LogitBatch: batch size must be >= 1");
  }
  if (values.cols() < 2) {
    throw std::invalid_argument("LogitBatch: class count must be >= 2");
  }
  if (labels.size() != values.rows()) {
    throw std::invalid_argument(
        "LogitBatch: labels length " + std::to_string(labels.size()) +
        " does not match row count " + std::to_string(values.rows()));
  }
  if (!values.allFinite()) {
    throw std::invalid_argument("LogitBatch: values contain NaN/Inf");
  }
  const int c = num_classes();
  for (int i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= c) {
      throw std::invalid_argument("LogitBatch: label " +
                                  std::to_string(labels[i]) +
                                  " out of range [0, " + std::to_string(c) + ")");
    }
  }
}

void check_aligned(const LogitBatch& student, const LogitBatch& teacher) {
  student.validate();
  teacher.validate();
  if (student.values.rows() != teacher.values.rows() ||
      student.values.cols() != teacher.values.cols()) {
    throw std::invalid_argument("logit batches have mismatched shapes");
  }
  if (student.labels != teacher.labels) {
    throw std::invalid_argument("logit batches are not label-aligned");
  }
}

}  // namespace mcld
