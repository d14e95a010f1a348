#include "mcld/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace mcld {

MaskMode mask_mode_from_string(const std::string& s) {
  if (s == "exclude") return MaskMode::kExclude;
  if (s == "literal_multiply") return MaskMode::kLiteralMultiply;
  throw std::invalid_argument("unknown mask_mode: " + s);
}

std::string to_string(MaskMode m) {
  return m == MaskMode::kExclude ? "exclude" : "literal_multiply";
}

void LossConfig::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("LossConfig: tau must be > 0");
  if (!(kd_tau > 0.0)) {
    throw std::invalid_argument("LossConfig: kd_tau must be > 0");
  }
  if (queue_capacity < 1) {
    throw std::invalid_argument("LossConfig: queue_capacity must be >= 1");
  }
  if (warmup_end_epoch < 1) {
    throw std::invalid_argument("LossConfig: warmup_end_epoch must be >= 1");
  }
  if (task_ce_weight < 0.0) {
    throw std::invalid_argument("LossConfig: task_ce_weight must be >= 0");
  }
}

namespace {

double log_sum_exp(const std::vector<double>& terms) {
  double m = -std::numeric_limits<double>::infinity();
  for (double t : terms) m = std::max(m, t);
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

// Chain-rule projection through row normalization z -> z/||z||.
// grad_hat is d(loss)/d(normalized rows); raw is the unnormalized matrix.
Eigen::MatrixXd project_through_normalization(const Eigen::MatrixXd& grad_hat,
                                              const Eigen::MatrixXd& raw) {
  Eigen::MatrixXd out(grad_hat.rows(), grad_hat.cols());
  for (int i = 0; i < raw.rows(); ++i) {
    const double n = raw.row(i).norm();
    if (n > 0.0) {
      const Eigen::RowVectorXd zhat = raw.row(i) / n;
      out.row(i) = (grad_hat.row(i) - zhat * (zhat.dot(grad_hat.row(i)))) / n;
    } else {
      out.row(i) = grad_hat.row(i);
    }
  }
  return out;
}

}  // namespace

double instance_wise_loss(const SimilarityScores& scores,
                          const LossConfig& config) {
  config.validate();
  const double tau = config.tau;
  const int b = static_cast<int>(scores.positive.size());
  const int f = static_cast<int>(scores.negatives.cols());
  if (scores.mask.rows() != b || scores.mask.cols() != f) {
    throw std::invalid_argument("instance_wise_loss: malformed scores");
  }

  double total = 0.0;
  std::vector<double> terms;
  for (int i = 0; i < b; ++i) {
    terms.clear();
    const double pos = scores.positive[i] / tau;
    terms.push_back(pos);
    for (int j = 0; j < f; ++j) {
      if (scores.mask(i, j) != 0.0) {
        terms.push_back(scores.negatives(i, j) / tau);
      } else if (config.mask_mode == MaskMode::kLiteralMultiply) {
        terms.push_back(0.0);  // exp(gamma * sigma / tau) with gamma = 0
      }
    }
    total += log_sum_exp(terms) - pos;
  }
  return total / b;
}

double instance_wise_loss_grad(const LogitBatch& student,
                               const LogitBatch& teacher,
                               const ProductQueue& queue,
                               const TargetMaskQueue& mask_queue,
                               const LossConfig& config,
                               Eigen::MatrixXd* grad) {
  const SimilarityScores scores =
      compute_instance_scores(student, teacher, queue, mask_queue, config);
  const double tau = config.tau;
  const int b = student.batch_size();
  const int f = static_cast<int>(scores.negatives.cols());

  Eigen::MatrixXd zt = teacher.values;
  Eigen::MatrixXd negs = queue.filled();
  if (config.normalize_logits) {
    zt = normalize_rows(zt);
    negs = normalize_rows(negs);
  }

  Eigen::MatrixXd g_hat = Eigen::MatrixXd::Zero(b, student.num_classes());
  double total = 0.0;
  for (int i = 0; i < b; ++i) {
    std::vector<double> terms;
    std::vector<int> term_queue_idx;  // -1 for the positive, -2 for mask slots
    const double pos = scores.positive[i] / tau;
    terms.push_back(pos);
    term_queue_idx.push_back(-1);
    for (int j = 0; j < f; ++j) {
      if (scores.mask(i, j) != 0.0) {
        terms.push_back(scores.negatives(i, j) / tau);
        term_queue_idx.push_back(j);
      } else if (config.mask_mode == MaskMode::kLiteralMultiply) {
        terms.push_back(0.0);
        term_queue_idx.push_back(-2);  // constant term, no gradient
      }
    }
    const double lse = log_sum_exp(terms);
    total += lse - pos;

    for (size_t t = 0; t < terms.size(); ++t) {
      const double p = std::exp(terms[t] - lse);
      const int qj = term_queue_idx[t];
      if (qj == -1) {
        g_hat.row(i) += ((p - 1.0) / tau) * zt.row(i);
      } else if (qj >= 0) {
        g_hat.row(i) += (p / tau) * negs.row(qj);
      }
    }
  }
  g_hat /= b;
  *grad = config.normalize_logits
              ? project_through_normalization(g_hat, student.values)
              : g_hat;
  return total / b;
}

double sample_wise_loss(const LogitBatch& student, const LogitBatch& teacher,
                        const LossConfig& config) {
  config.validate();
  const Eigen::MatrixXd eta = similarity_matrix(student, teacher, config);
  const int b = static_cast<int>(eta.rows());
  double total = 0.0;
  for (int i = 0; i < b; ++i) {
    std::vector<double> terms(b);
    for (int j = 0; j < b; ++j) terms[j] = eta(i, j) / config.tau;
    total += log_sum_exp(terms) - terms[i];
  }
  return total / b;
}

double sample_wise_loss_grad(const LogitBatch& student,
                             const LogitBatch& teacher,
                             const LossConfig& config, Eigen::MatrixXd* grad) {
  config.validate();
  const Eigen::MatrixXd eta = similarity_matrix(student, teacher, config);
  const int b = static_cast<int>(eta.rows());
  const double tau = config.tau;

  Eigen::MatrixXd zt = teacher.values;
  if (config.normalize_logits) zt = normalize_rows(zt);

  Eigen::MatrixXd g_eta(b, b);
  double total = 0.0;
  for (int i = 0; i < b; ++i) {
    std::vector<double> terms(b);
    for (int j = 0; j < b; ++j) terms[j] = eta(i, j) / tau;
    const double lse = log_sum_exp(terms);
    total += lse - terms[i];
    for (int j = 0; j < b; ++j) {
      g_eta(i, j) = (std::exp(terms[j] - lse) - (j == i ? 1.0 : 0.0)) / (tau * b);
    }
  }
  const Eigen::MatrixXd g_hat = g_eta * zt;
  *grad = config.normalize_logits
              ? project_through_normalization(g_hat, student.values)
              : g_hat;
  return total / b;
}

double category_wise_loss(const LogitBatch& student, const LogitBatch& teacher,
                          const LossConfig& config) {
  config.validate();
  const CategoryScores scores = compute_category_scores(student, teacher, config);
  const double tau = config.tau;
  double total = 0.0;
  int counted = 0;
  for (const AnchorPairs& a : scores.anchors) {
    if (a.positives.empty() || a.negatives.empty()) continue;
    std::vector<double> neg_terms(a.negatives.size());
    for (size_t n = 0; n < a.negatives.size(); ++n) {
      neg_terms[n] = a.negatives[n] / tau;
    }
    const double lse_neg = log_sum_exp(neg_terms);
    double anchor_loss = 0.0;
    for (double psi_p : a.positives) {
      anchor_loss += lse_neg - psi_p / tau;
    }
    total += anchor_loss / static_cast<double>(a.positives.size());
    ++counted;
  }
  return counted == 0 ? 0.0 : total / counted;
}

double category_wise_loss_grad(const LogitBatch& student,
                               const LogitBatch& teacher,
                               const LossConfig& config,
                               Eigen::MatrixXd* grad) {
  config.validate();
  const Eigen::MatrixXd eta = similarity_matrix(student, teacher, config);
  const int b = static_cast<int>(eta.rows());
  const double tau = config.tau;

  Eigen::MatrixXd zt = teacher.values;
  if (config.normalize_logits) zt = normalize_rows(zt);

  // First pass: which anchors have both pair kinds.
  std::vector<std::vector<int>> pos_idx(b), neg_idx(b);
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < b; ++j) {
      if (j == i) continue;
      if (student.labels[i] == student.labels[j]) {
        pos_idx[i].push_back(j);
      } else {
        neg_idx[i].push_back(j);
      }
    }
  }
  int counted = 0;
  for (int i = 0; i < b; ++i) {
    if (!pos_idx[i].empty() && !neg_idx[i].empty()) ++counted;
  }

  Eigen::MatrixXd g_hat = Eigen::MatrixXd::Zero(b, student.num_classes());
  double total = 0.0;
  if (counted > 0) {
    for (int i = 0; i < b; ++i) {
      if (pos_idx[i].empty() || neg_idx[i].empty()) continue;
      const double p_count = static_cast<double>(pos_idx[i].size());
      std::vector<double> neg_terms(neg_idx[i].size());
      for (size_t n = 0; n < neg_idx[i].size(); ++n) {
        neg_terms[n] = eta(i, neg_idx[i][n]) / tau;
      }
      const double lse_neg = log_sum_exp(neg_terms);
      double anchor_loss = 0.0;
      for (int p : pos_idx[i]) {
        anchor_loss += lse_neg - eta(i, p) / tau;
        g_hat.row(i) -= zt.row(p) / (p_count * tau * counted);
      }
      for (size_t n = 0; n < neg_idx[i].size(); ++n) {
        const double w = std::exp(neg_terms[n] - lse_neg);
        g_hat.row(i) += (w / (tau * counted)) * zt.row(neg_idx[i][n]);
      }
      total += anchor_loss / p_count;
    }
    total /= counted;
  }
  *grad = config.normalize_logits
              ? project_through_normalization(g_hat, student.values)
              : g_hat;
  return total;
}

double warmup_weight(int epoch, const LossConfig& config) {
  config.validate();
  if (epoch < 0) throw std::invalid_argument("warmup_weight: epoch must be >= 0");
  return std::min(1.0, static_cast<double>(epoch) / config.warmup_end_epoch);
}

double task_ce_loss(const LogitBatch& student) {
  Eigen::MatrixXd unused;
  return task_ce_loss_grad(student, &unused);
}

double task_ce_loss_grad(const LogitBatch& student, Eigen::MatrixXd* grad) {
  student.validate();
  const int b = student.batch_size();
  const int c = student.num_classes();
  grad->resize(b, c);
  double total = 0.0;
  for (int i = 0; i < b; ++i) {
    std::vector<double> terms(c);
    for (int j = 0; j < c; ++j) terms[j] = student.values(i, j);
    const double lse = log_sum_exp(terms);
    total += lse - terms[student.labels[i]];
    for (int j = 0; j < c; ++j) {
      (*grad)(i, j) = (std::exp(terms[j] - lse) -
                       (j == student.labels[i] ? 1.0 : 0.0)) /
                      b;
    }
  }
  return total / b;
}

McldComponents mcld_loss(const LogitBatch& student, const LogitBatch& teacher,
                         const ProductQueue& queue,
                         const TargetMaskQueue& mask_queue, int epoch,
                         const LossConfig& config, const ComponentFlags& flags) {
  McldComponents out;
  out.omega = warmup_weight(epoch, config);
  if (flags.instance) {
    out.instance = instance_wise_loss(
        compute_instance_scores(student, teacher, queue, mask_queue, config),
        config);
  }
  if (flags.sample) out.sample = sample_wise_loss(student, teacher, config);
  if (flags.category) {
    out.category = category_wise_loss(student, teacher, config);
  }
  out.total = out.instance + out.sample + out.omega * out.category;
  return out;
}

McldComponents mcld_loss_grad(const LogitBatch& student,
                              const LogitBatch& teacher,
                              const ProductQueue& queue,
                              const TargetMaskQueue& mask_queue, int epoch,
                              const LossConfig& config,
                              const ComponentFlags& flags,
                              Eigen::MatrixXd* grad) {
  McldComponents out;
  out.omega = warmup_weight(epoch, config);
  grad->setZero(student.batch_size(), student.num_classes());
  Eigen::MatrixXd g;
  if (flags.instance) {
    out.instance = instance_wise_loss_grad(student, teacher, queue, mask_queue,
                                           config, &g);
    *grad += g;
  }
  if (flags.sample) {
    out.sample = sample_wise_loss_grad(student, teacher, config, &g);
    *grad += g;
  }
  if (flags.category && out.omega > 0.0) {
    out.category = category_wise_loss_grad(student, teacher, config, &g);
    *grad += out.omega * g;
  } else if (flags.category) {
    out.category = category_wise_loss(student, teacher, config);
  }
  out.total = out.instance + out.sample + out.omega * out.category;
  return out;
}

}  // namespace mcld
