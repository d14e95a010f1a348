#pragma once

#include <Eigen/Dense>

#include "mcld/logit_batch.hpp"

namespace mcld {

// Temperature-softened class distribution, softmax(z / tau).
struct ProbabilityDistribution {
  Eigen::VectorXd probs;
};

// Numerically stable softmax of logits / tau (max-subtraction).
ProbabilityDistribution softened_probs(const Eigen::VectorXd& logits,
                                       double tau);

// Classic KD: mean over the batch of tau^2 * KL(p_teacher || p_student)
// on the softened distributions. Teacher logits are constants.
double kd_loss(const LogitBatch& student, const LogitBatch& teacher,
               double tau);

// Same value plus the gradient w.r.t. the raw student logits.
double kd_loss_grad(const LogitBatch& student, const LogitBatch& teacher,
                    double tau, Eigen::MatrixXd* grad);

}  // namespace mcld
