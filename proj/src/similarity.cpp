#include "mcld/similarity.hpp"

#include <stdexcept>

namespace mcld {

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = m;
  for (int i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0.0) out.row(i) /= n;
  }
  return out;
}

SimilarityScores compute_instance_scores(const LogitBatch& student,
                                         const LogitBatch& teacher,
                                         const ProductQueue& queue,
                                         const TargetMaskQueue& mask_queue,
                                         const LossConfig& config) {
  check_aligned(student, teacher);
  config.validate();
  if (queue.width() != student.num_classes()) {
    throw std::invalid_argument("queue row width does not match class count");
  }
  if (queue.fill_count() != mask_queue.fill_count()) {
    throw std::logic_error("product/mask queues out of sync");
  }

  Eigen::MatrixXd zs = student.values;
  Eigen::MatrixXd zt = teacher.values;
  Eigen::MatrixXd negs = queue.filled();
  if (config.normalize_logits) {
    zs = normalize_rows(zs);
    zt = normalize_rows(zt);
    negs = normalize_rows(negs);
  }

  const int b = static_cast<int>(zs.rows());
  const int f = static_cast<int>(negs.rows());
  const Eigen::VectorXi queue_labels = mask_queue.filled();

  SimilarityScores scores;
  scores.positive = (zs.array() * zt.array()).rowwise().sum();
  scores.negatives = zs * negs.transpose();
  scores.mask.resize(b, f);
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < f; ++j) {
      scores.mask(i, j) = (student.labels[i] == queue_labels[j]) ? 0.0 : 1.0;
    }
  }
  return scores;
}

Eigen::MatrixXd similarity_matrix(const LogitBatch& student,
                                  const LogitBatch& teacher,
                                  const LossConfig& config) {
  check_aligned(student, teacher);
  if (config.normalize_logits) {
    return normalize_rows(student.values) *
           normalize_rows(teacher.values).transpose();
  }
  return student.values * teacher.values.transpose();
}

CategoryScores compute_category_scores(const LogitBatch& student,
                                       const LogitBatch& teacher,
                                       const LossConfig& config) {
  // Pair scores reuse the full similarity matrix; positives are same-label
  // pairs with i != p, negatives are different-label pairs.
  const Eigen::MatrixXd eta = similarity_matrix(student, teacher, config);
  const int b = static_cast<int>(eta.rows());

  CategoryScores scores;
  scores.anchors.resize(b);
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < b; ++j) {
      if (j == i) continue;
      if (student.labels[i] == student.labels[j]) {
        scores.anchors[i].positives.push_back(eta(i, j));
      } else {
        scores.anchors[i].negatives.push_back(eta(i, j));
      }
    }
  }
  return scores;
}

}  // namespace mcld
