#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <deque>
#include <random>
#include <utility>

#include "mcld/queue.hpp"
#include "mcld/similarity.hpp"
#include "test_util.hpp"

using namespace mcld;

namespace {

LogitBatch one_row(std::initializer_list<double> vals, int label) {
  LogitBatch b;
  b.values.resize(1, static_cast<int>(vals.size()));
  int j = 0;
  for (double v : vals) b.values(0, j++) = v;
  b.labels.resize(1);
  b.labels[0] = label;
  return b;
}

}  // namespace

TEST_CASE("FIFO eviction keeps the K most recent in arrival order") {
  ProductQueue q(2, 2);
  TargetMaskQueue mq(2);
  enqueue(q, mq, one_row({1, 0}, 0));  // a
  enqueue(q, mq, one_row({2, 0}, 1));  // b
  enqueue(q, mq, one_row({3, 0}, 0));  // c evicts a
  CHECK(q.fill_count() == 2);
  Eigen::MatrixXd rows = q.filled();
  CHECK(rows(0, 0) == 2.0);
  CHECK(rows(1, 0) == 3.0);
  Eigen::VectorXi labels = mq.filled();
  CHECK(labels[0] == 1);
  CHECK(labels[1] == 0);
}

TEST_CASE("batch enqueue into an empty queue fills both sides in parallel") {
  ProductQueue q(8, 3);
  TargetMaskQueue mq(8);
  std::mt19937_64 rng(7);
  LogitBatch b = testutil::random_batch(rng, 4, 3);
  enqueue(q, mq, b);
  CHECK(q.fill_count() == 4);
  CHECK(mq.fill_count() == 4);
  CHECK(q.filled() == b.values);
  CHECK(mq.filled() == b.labels);
}

TEST_CASE("width mismatch is rejected") {
  ProductQueue q(4, 3);
  TargetMaskQueue mq(4);
  std::mt19937_64 rng(1);
  LogitBatch b = testutil::random_batch(rng, 2, 5);
  CHECK_THROWS(enqueue(q, mq, b));
}

TEST_CASE("randomized enqueue/score sequences track a list-based reference") {
  const int capacity = 6;
  const int c = 3;
  std::mt19937_64 rng(42);
  ProductQueue q(capacity, c);
  TargetMaskQueue mq(capacity);
  std::deque<std::pair<Eigen::VectorXd, int>> ref;
  LossConfig cfg;
  cfg.tau = 1.0;

  for (int step = 0; step < 500; ++step) {
    const int b = 1 + static_cast<int>(rng() % 4);
    LogitBatch batch = testutil::random_batch(rng, b, c);
    if (rng() % 2 == 0) {
      enqueue(q, mq, batch);
      for (int i = 0; i < b; ++i) {
        ref.emplace_back(batch.values.row(i).transpose(), batch.labels[i]);
        if (static_cast<int>(ref.size()) > capacity) ref.pop_front();
      }
    } else {
      SimilarityScores s = compute_instance_scores(batch, batch, q, mq, cfg);
      REQUIRE(q.fill_count() == static_cast<int>(ref.size()));
      REQUIRE(mq.fill_count() == q.fill_count());
      for (size_t j = 0; j < ref.size(); ++j) {
        for (int i = 0; i < b; ++i) {
          CHECK(s.negatives(i, j) ==
                doctest::Approx(batch.values.row(i).dot(ref[j].first))
                    .epsilon(1e-12));
          CHECK(s.mask(i, j) ==
                (batch.labels[i] == ref[j].second ? 0.0 : 1.0));
        }
      }
    }
  }
}
