#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mcld/kd.hpp"
#include "test_util.hpp"

using namespace mcld;

TEST_CASE("softened probs: symmetric logits give uniform") {
  Eigen::VectorXd z(2);
  z << 0, 0;
  auto p = softened_probs(z, 1.0);
  CHECK(p.probs[0] == doctest::Approx(0.5));
  CHECK(p.probs[1] == doctest::Approx(0.5));
}

TEST_CASE("softened probs: large tau approaches uniform") {
  Eigen::VectorXd z(3);
  z << 3.0, -1.0, 0.5;
  auto p = softened_probs(z, 1e4);
  CHECK(p.probs.maxCoeff() - p.probs.minCoeff() < 1e-3);
}

TEST_CASE("softened probs: frozen two-class value") {
  Eigen::VectorXd z(2);
  z << 1, 0;
  auto p = softened_probs(z, 1.0);
  const double e = std::exp(1.0);
  CHECK(p.probs[0] == doctest::Approx(e / (e + 1.0)).epsilon(1e-12));
  CHECK(p.probs[1] == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-12));
  CHECK(p.probs.sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("softened probs: tau <= 0 rejected") {
  Eigen::VectorXd z(2);
  z << 1, 0;
  CHECK_THROWS(softened_probs(z, 0.0));
  CHECK_THROWS(softened_probs(z, -1.0));
}

TEST_CASE("kd loss: identical batches give 0, always nonnegative") {
  std::mt19937_64 rng(17);
  LogitBatch s = testutil::random_batch(rng, 4, 5);
  CHECK(kd_loss(s, s, 4.0) == doctest::Approx(0.0).epsilon(1e-12));
  for (int trial = 0; trial < 50; ++trial) {
    LogitBatch a = testutil::random_batch(rng, 3, 4);
    LogitBatch b = a;
    b.values = testutil::random_batch(rng, 3, 4).values;
    CHECK(kd_loss(a, b, 4.0) >= 0.0);
  }
}

TEST_CASE("kd loss: fixed two-class instance matches the scalar oracle") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const int b = 1 + static_cast<int>(rng() % 4);
    LogitBatch s = testutil::random_batch(rng, b, 2);
    LogitBatch t = s;
    t.values = testutil::random_batch(rng, b, 2).values;
    const double tau = 1.0 + (trial % 5);
    CHECK(kd_loss(s, t, tau) ==
          doctest::Approx(oracle::kd_loss(testutil::to_oracle(s.values),
                                          testutil::to_oracle(t.values), tau))
              .epsilon(1e-10));
  }
}

TEST_CASE("kd loss is 0 iff softened rows coincide") {
  LogitBatch s, t;
  s.values.resize(1, 3);
  t.values.resize(1, 3);
  // Distributions agree when logits differ by a per-row constant.
  s.values << 1.0, 2.0, 3.0;
  t.values << 2.5, 3.5, 4.5;
  s.labels.resize(1);
  t.labels.resize(1);
  s.labels[0] = t.labels[0] = 0;
  CHECK(kd_loss(s, t, 4.0) == doctest::Approx(0.0).epsilon(1e-12));
  t.values << 2.5, 3.5, 4.4;
  CHECK(kd_loss(s, t, 4.0) > 1e-9);
}

TEST_CASE("softmax ratio identity: scaling logits by tau at temperature 1") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd z = Eigen::VectorXd::Random(4) * 3.0;
    const double tau = 4.0;
    auto a = softened_probs(z, tau);
    auto b = softened_probs(Eigen::VectorXd(z / tau), 1.0);
    for (int j = 0; j < 4; ++j) {
      CHECK(a.probs[j] == doctest::Approx(b.probs[j]).epsilon(1e-12));
    }
  }
}
