#pragma once

#include <Eigen/Dense>

#include "mcld/logit_batch.hpp"
#include "mcld/loss_config.hpp"
#include "mcld/queue.hpp"
#include "mcld/similarity.hpp"

namespace mcld {

// Ablation switches for the three perspectives; disabled terms contribute 0.
struct ComponentFlags {
  bool instance = true;
  bool sample = true;
  bool category = true;
};

// One evaluation of the composite objective, with components for logging.
struct McldComponents {
  double total = 0.0;
  double instance = 0.0;
  double sample = 0.0;
  double category = 0.0;
  double omega = 0.0;
};

// InfoNCE with the queue negatives, cast as (K+1)-way cross entropy: the
// positive sits at position 0 and always appears in the denominator.
double instance_wise_loss(const SimilarityScores& scores,
                          const LossConfig& config);

// B-way cross entropy on rows of the similarity matrix eta/tau against the
// diagonal targets (0..B-1).
double sample_wise_loss(const LogitBatch& student, const LogitBatch& teacher,
                        const LossConfig& config);

// Supervised-contrastive term over same-label pairs in the batch; the
// denominator sums negatives only. Anchors with no positive or no negative
// pairs are excluded from the mean.
double category_wise_loss(const LogitBatch& student, const LogitBatch& teacher,
                          const LossConfig& config);

// Linear ramp: min(1, epoch / warmup_end_epoch).
double warmup_weight(int epoch, const LossConfig& config);

// Hard-label cross entropy on raw student logits (temperature 1).
double task_ce_loss(const LogitBatch& student);

// L_Inst + L_Samp + omega * L_Cate. Does not mutate the queues; enqueueing
// is the caller's separate step after the loss.
McldComponents mcld_loss(const LogitBatch& student, const LogitBatch& teacher,
                         const ProductQueue& queue,
                         const TargetMaskQueue& mask_queue, int epoch,
                         const LossConfig& config,
                         const ComponentFlags& flags = {});

// ---- Gradients w.r.t. the raw student logits (B x C). Each returns the
// loss value and writes the gradient; teacher logits are treated as
// constants throughout.

double instance_wise_loss_grad(const LogitBatch& student,
                               const LogitBatch& teacher,
                               const ProductQueue& queue,
                               const TargetMaskQueue& mask_queue,
                               const LossConfig& config, Eigen::MatrixXd* grad);

double sample_wise_loss_grad(const LogitBatch& student,
                             const LogitBatch& teacher,
                             const LossConfig& config, Eigen::MatrixXd* grad);

double category_wise_loss_grad(const LogitBatch& student,
                               const LogitBatch& teacher,
                               const LossConfig& config, Eigen::MatrixXd* grad);

double task_ce_loss_grad(const LogitBatch& student, Eigen::MatrixXd* grad);

McldComponents mcld_loss_grad(const LogitBatch& student,
                              const LogitBatch& teacher,
                              const ProductQueue& queue,
                              const TargetMaskQueue& mask_queue, int epoch,
                              const LossConfig& config,
                              const ComponentFlags& flags,
                              Eigen::MatrixXd* grad);

}  // namespace mcld
