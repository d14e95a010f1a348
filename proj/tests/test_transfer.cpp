#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "mcld/data/dataset.hpp"
#include "mcld/io/feature_table.hpp"
#include "mcld/transfer.hpp"

using namespace mcld;
namespace fs = std::filesystem;

namespace {

// Gaussian clusters with well-separated means: linearly separable.
io::FeatureTable cluster_features(int per_class, int classes, int dim,
                                  double spread, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> noise(0.0f, 0.3f);
  io::FeatureTable t;
  t.features.resize(per_class * classes, dim);
  t.labels.resize(per_class * classes);
  for (int c = 0; c < classes; ++c) {
    Eigen::VectorXf mean(dim);
    std::mt19937_64 crng(seed * 131 + c);
    std::normal_distribution<float> m(0.0f, static_cast<float>(spread));
    for (int d = 0; d < dim; ++d) mean[d] = m(crng);
    for (int s = 0; s < per_class; ++s) {
      const int row = c * per_class + s;
      t.labels[row] = c;
      for (int d = 0; d < dim; ++d) {
        t.features(row, d) = mean[d] + noise(rng);
      }
    }
  }
  return t;
}

}  // namespace

TEST_CASE("linearly separable features probe to near-perfect accuracy") {
  auto train = cluster_features(40, 4, 8, 3.0, 1);
  auto test = cluster_features(20, 4, 8, 3.0, 1);
  const double top1 = transfer::linear_probe(train, test, 4, 7);
  CHECK(top1 >= 99.0);
}

TEST_CASE("label-shuffled features probe at chance level") {
  auto train = cluster_features(40, 4, 8, 3.0, 2);
  auto test = cluster_features(40, 4, 8, 3.0, 3);  // unrelated clusters
  std::mt19937_64 rng(5);
  std::shuffle(train.labels.begin(), train.labels.end(), rng);
  std::shuffle(test.labels.begin(), test.labels.end(), rng);
  const double top1 = transfer::linear_probe(train, test, 4, 7);
  CHECK(top1 >= 25.0 - 15.0);
  CHECK(top1 <= 25.0 + 15.0);
}

TEST_CASE("probe is invariant to a consistent feature column permutation") {
  auto train = cluster_features(30, 3, 6, 2.5, 4);
  auto test = cluster_features(15, 3, 6, 2.5, 4);
  const double base = transfer::linear_probe(train, test, 3, 11);

  std::vector<int> perm = {3, 0, 5, 1, 4, 2};
  auto permute = [&perm](io::FeatureTable t) {
    Eigen::MatrixXf p(t.features.rows(), t.features.cols());
    for (int j = 0; j < static_cast<int>(perm.size()); ++j) {
      p.col(j) = t.features.col(perm[j]);
    }
    t.features = p;
    return t;
  };
  const double permuted =
      transfer::linear_probe(permute(train), permute(test), 3, 11);
  CHECK(base == permuted);
}

TEST_CASE("extraction is deterministic and leaves the model untouched") {
  nn::ModelSpec spec;
  spec.width = 2;
  spec.num_classes = 4;
  spec.image_h = 8;
  spec.image_w = 8;
  nn::Model model(spec, 21);
  const uint64_t before = model.param_checksum();

  data::DatasetSpec dspec;
  dspec.num_classes = 4;
  dspec.train_per_class = 10;
  dspec.test_per_class = 5;
  dspec.image_h = 8;
  dspec.image_w = 8;
  dspec.seed = 13;
  auto ds = data::load_split(dspec, "test");

  auto a = transfer::extract_features(model, ds);
  auto b = transfer::extract_features(model, ds);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK(a.features.rows() == ds.size());
  CHECK(a.features.cols() == spec.feature_dim());
  CHECK(a.features.allFinite());
  CHECK(model.param_checksum() == before);
}

TEST_CASE("probing never mutates the feature tables") {
  auto train = cluster_features(20, 3, 6, 2.0, 9);
  auto test = cluster_features(10, 3, 6, 2.0, 9);
  auto train_copy = train.features;
  auto test_copy = test.features;
  transfer::linear_probe(train, test, 3, 1);
  CHECK(train.features == train_copy);
  CHECK(test.features == test_copy);
}

TEST_CASE("probe seeds give reproducible results") {
  auto train = cluster_features(30, 4, 8, 1.0, 6);
  auto test = cluster_features(15, 4, 8, 1.0, 6);
  CHECK(transfer::linear_probe(train, test, 4, 5) ==
        transfer::linear_probe(train, test, 4, 5));
}

TEST_CASE("feature tables roundtrip through disk with checksum verification") {
  auto t = cluster_features(12, 3, 5, 2.0, 8);
  const std::string prefix =
      (fs::temp_directory_path() / "mcld_feat_roundtrip").string();
  io::save_feature_table(prefix, t);
  auto loaded = io::load_feature_table(prefix);
  CHECK(loaded.features == t.features);
  CHECK(loaded.labels == t.labels);

  // Flip one byte in the binary blob; loading must fail.
  {
    std::fstream f(prefix + ".bin",
                   std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(10);
    f.put(static_cast<char>(0x7f));
  }
  CHECK_THROWS(io::load_feature_table(prefix));
  fs::remove(prefix + ".bin");
  fs::remove(prefix + ".manifest.json");
}

TEST_CASE("a class missing from the train split only warns") {
  auto train = cluster_features(20, 3, 6, 2.5, 10);
  auto test = cluster_features(10, 3, 6, 2.5, 10);
  // Declare 4 classes while only 3 appear in train.
  const double top1 = transfer::linear_probe(train, test, 4, 2);
  CHECK(top1 >= 0.0);
}
