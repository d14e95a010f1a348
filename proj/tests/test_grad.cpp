#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "mcld/kd.hpp"
#include "mcld/losses.hpp"
#include "test_util.hpp"

using namespace mcld;

namespace {

// Central finite differences over every student logit entry.
Eigen::MatrixXd numeric_grad(const std::function<double(const LogitBatch&)>& f,
                             LogitBatch student, double step = 1e-5) {
  Eigen::MatrixXd g(student.values.rows(), student.values.cols());
  for (int i = 0; i < student.values.rows(); ++i) {
    for (int j = 0; j < student.values.cols(); ++j) {
      const double saved = student.values(i, j);
      student.values(i, j) = saved + step;
      const double hi = f(student);
      student.values(i, j) = saved - step;
      const double lo = f(student);
      student.values(i, j) = saved;
      g(i, j) = (hi - lo) / (2.0 * step);
    }
  }
  return g;
}

void check_close(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric,
                 double rel_tol = 1e-4) {
  const double scale = std::max(1e-8, numeric.cwiseAbs().maxCoeff());
  for (int i = 0; i < analytic.rows(); ++i) {
    for (int j = 0; j < analytic.cols(); ++j) {
      CHECK(std::abs(analytic(i, j) - numeric(i, j)) <= rel_tol * scale);
    }
  }
}

}  // namespace

TEST_CASE("gradients of all losses match central finite differences") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int b = 4, c = 6;
    LogitBatch s = testutil::random_batch(rng, b, c);
    LogitBatch t = s;
    t.values = testutil::random_batch(rng, b, c).values;
    ProductQueue q(6, c);
    TargetMaskQueue mq(6);
    enqueue(q, mq, testutil::random_batch(rng, 5, c));

    LossConfig cfg;
    cfg.tau = 0.5 + 0.5 * (trial % 3);
    cfg.mask_mode = (trial % 2 == 0) ? MaskMode::kExclude
                                     : MaskMode::kLiteralMultiply;
    cfg.normalize_logits = (trial % 4 == 0);

    Eigen::MatrixXd g;

    instance_wise_loss_grad(s, t, q, mq, cfg, &g);
    check_close(g, numeric_grad(
                       [&](const LogitBatch& x) {
                         return instance_wise_loss(
                             compute_instance_scores(x, t, q, mq, cfg), cfg);
                       },
                       s));

    sample_wise_loss_grad(s, t, cfg, &g);
    check_close(g, numeric_grad(
                       [&](const LogitBatch& x) {
                         return sample_wise_loss(x, t, cfg);
                       },
                       s));

    category_wise_loss_grad(s, t, cfg, &g);
    check_close(g, numeric_grad(
                       [&](const LogitBatch& x) {
                         return category_wise_loss(x, t, cfg);
                       },
                       s));

    kd_loss_grad(s, t, 4.0, &g);
    check_close(g, numeric_grad(
                       [&](const LogitBatch& x) { return kd_loss(x, t, 4.0); },
                       s));

    task_ce_loss_grad(s, &g);
    check_close(g, numeric_grad(
                       [&](const LogitBatch& x) { return task_ce_loss(x); }, s));
  }
}

TEST_CASE("composite gradient equals the weighted sum of component gradients") {
  std::mt19937_64 rng(13);
  LogitBatch s = testutil::random_batch(rng, 4, 6);
  LogitBatch t = s;
  t.values = testutil::random_batch(rng, 4, 6).values;
  ProductQueue q(6, 6);
  TargetMaskQueue mq(6);
  enqueue(q, mq, testutil::random_batch(rng, 6, 6));
  LossConfig cfg;
  cfg.tau = 1.0;
  cfg.warmup_end_epoch = 4;

  Eigen::MatrixXd g_total, gi, gs, gc;
  McldComponents comp =
      mcld_loss_grad(s, t, q, mq, 2, cfg, ComponentFlags{}, &g_total);
  instance_wise_loss_grad(s, t, q, mq, cfg, &gi);
  sample_wise_loss_grad(s, t, cfg, &gs);
  category_wise_loss_grad(s, t, cfg, &gc);
  Eigen::MatrixXd expect = gi + gs + comp.omega * gc;
  CHECK((g_total - expect).cwiseAbs().maxCoeff() < 1e-12);
}
