#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mcld/logit_batch.hpp"
#include "mcld/loss_config.hpp"
#include "mcld/queue.hpp"

namespace mcld {

// Instance-wise similarities for one batch against the queue.
// positive[i] is the matched student/teacher dot product; negatives[i][j]
// pairs anchor i with queue entry j; mask[i][j] is 0 exactly when the anchor
// label equals the queue label, else 1.
struct SimilarityScores {
  Eigen::VectorXd positive;   // B
  Eigen::MatrixXd negatives;  // B x fill_count
  Eigen::MatrixXd mask;       // B x fill_count, entries 0/1
};

// Category-wise pair similarities for one anchor.
struct AnchorPairs {
  std::vector<double> positives;  // psi_p: same label, different sample
  std::vector<double> negatives;  // psi_n: different label
};

// Per-anchor positive/negative pair scores within the batch.
struct CategoryScores {
  std::vector<AnchorPairs> anchors;  // length B
};

// Rows scaled to unit Euclidean norm; zero rows are left unchanged.
Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& m);

SimilarityScores compute_instance_scores(const LogitBatch& student,
                                         const LogitBatch& teacher,
                                         const ProductQueue& queue,
                                         const TargetMaskQueue& mask_queue,
                                         const LossConfig& config);

// eta = student * teacher^T (B x B), optionally on normalized rows.
Eigen::MatrixXd similarity_matrix(const LogitBatch& student,
                                  const LogitBatch& teacher,
                                  const LossConfig& config);

CategoryScores compute_category_scores(const LogitBatch& student,
                                       const LogitBatch& teacher,
                                       const LossConfig& config);

}  // namespace mcld
