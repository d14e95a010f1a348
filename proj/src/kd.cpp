#include "mcld/kd.hpp"

#include <cmath>
#include <stdexcept>

namespace mcld {

ProbabilityDistribution softened_probs(const Eigen::VectorXd& logits,
                                       double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("softened_probs: tau must be > 0");
  if (!logits.allFinite()) {
    throw std::invalid_argument("softened_probs: non-finite logits");
  }
  Eigen::VectorXd scaled = logits / tau;
  const double m = scaled.maxCoeff();
  Eigen::VectorXd e = (scaled.array() - m).exp();
  return ProbabilityDistribution{e / e.sum()};
}

double kd_loss(const LogitBatch& student, const LogitBatch& teacher,
               double tau) {
  Eigen::MatrixXd unused;
  return kd_loss_grad(student, teacher, tau, &unused);
}

double kd_loss_grad(const LogitBatch& student, const LogitBatch& teacher,
                    double tau, Eigen::MatrixXd* grad) {
  check_aligned(student, teacher);
  if (!(tau > 0.0)) throw std::invalid_argument("kd_loss: tau must be > 0");
  const int b = student.batch_size();
  const int c = student.num_classes();
  grad->resize(b, c);
  double total = 0.0;
  for (int i = 0; i < b; ++i) {
    const Eigen::VectorXd pt = softened_probs(teacher.values.row(i), tau).probs;
    const Eigen::VectorXd ps = softened_probs(student.values.row(i), tau).probs;
    double kl = 0.0;
    for (int j = 0; j < c; ++j) {
      kl += pt[j] * (std::log(pt[j]) - std::log(ps[j]));
    }
    total += tau * tau * kl;
    // d(tau^2 KL)/dz_s = tau * (p_s - p_t)
    grad->row(i) = (tau / b) * (ps - pt).transpose();
  }
  return total / b;
}

}  // namespace mcld
