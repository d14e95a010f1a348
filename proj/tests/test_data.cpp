#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "mcld/data/dataset.hpp"

using namespace mcld;
namespace fs = std::filesystem;

namespace {

data::DatasetSpec small_spec() {
  data::DatasetSpec s;
  s.num_classes = 4;
  s.train_per_class = 50;
  s.test_per_class = 10;
  s.seed = 11;
  return s;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  return std::vector<char>(std::istreambuf_iterator<char>(f), {});
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("synthetic split is balanced and in range") {
  auto ds = data::synthesize_split(small_spec(), "train");
  CHECK(ds.size() == 200);
  std::vector<int> counts(4, 0);
  for (int l : ds.labels) {
    REQUIRE(l >= 0);
    REQUIRE(l < 4);
    ++counts[l];
  }
  for (int c : counts) CHECK(c == 50);
}

TEST_CASE("train and test splits differ") {
  auto spec = small_spec();
  auto train = data::synthesize_split(spec, "train");
  auto test = data::synthesize_split(spec, "test");
  CHECK(train.pixels != test.pixels);
}

TEST_CASE("regeneration with the same seed is byte-identical on disk") {
  auto spec = small_spec();
  TempDir a("mcld_data_a"), b("mcld_data_b");
  data::synthesize_dataset(spec, a.path.string());
  data::synthesize_dataset(spec, b.path.string());
  for (const char* f : {"train.bin", "test.bin", "manifest.json"}) {
    CHECK(slurp(a.path / f) == slurp(b.path / f));
  }
  spec.seed = 12;
  TempDir c("mcld_data_c");
  data::synthesize_dataset(spec, c.path.string());
  CHECK(slurp(a.path / "train.bin") != slurp(c.path / "train.bin"));
}

TEST_CASE("stored records follow the cifar binary layout") {
  auto spec = small_spec();
  TempDir dir("mcld_data_layout");
  data::synthesize_dataset(spec, dir.path.string());
  const auto bytes = slurp(dir.path / "train.bin");
  const int rb = 1 + spec.channels * spec.image_h * spec.image_w;
  REQUIRE(static_cast<int>(bytes.size()) == 200 * rb);
  auto mem = data::synthesize_split(spec, "train");
  for (int i = 0; i < 5; ++i) {
    CHECK(static_cast<int>(static_cast<uint8_t>(bytes[i * rb])) ==
          mem.labels[i]);
    CHECK(std::memcmp(bytes.data() + i * rb + 1,
                      mem.pixels.data() + static_cast<size_t>(i) * (rb - 1),
                      rb - 1) == 0);
  }
}

TEST_CASE("loading a stored dataset verifies the manifest") {
  auto spec = small_spec();
  TempDir dir("mcld_data_manifest");
  data::synthesize_dataset(spec, dir.path.string());
  auto stored = spec;
  stored.path = dir.path.string();
  auto ds = data::load_split(stored, "train");
  CHECK(ds.size() == 200);
  auto mem = data::synthesize_split(spec, "train");
  CHECK(ds.pixels == mem.pixels);
  CHECK(ds.labels == mem.labels);

  // Corrupt one pixel byte; the checksum must catch it.
  {
    std::fstream f(dir.path / "train.bin",
                   std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(100);
    char c;
    f.seekg(100);
    f.get(c);
    c = static_cast<char>(c + 1);
    f.seekp(100);
    f.put(c);
  }
  CHECK_THROWS(data::load_split(stored, "train"));
}

TEST_CASE("epoch batch order is deterministic per (seed, epoch)") {
  auto a = data::epoch_batches(100, 32, 5, 3);
  auto b = data::epoch_batches(100, 32, 5, 3);
  CHECK(a == b);
  CHECK(a != data::epoch_batches(100, 32, 5, 4));
  CHECK(a != data::epoch_batches(100, 32, 6, 3));
  CHECK(a.size() == 4);
  CHECK(a.back().size() == 4);  // final partial batch kept
  std::vector<int> seen;
  for (const auto& batch : a) seen.insert(seen.end(), batch.begin(), batch.end());
  std::sort(seen.begin(), seen.end());
  for (int i = 0; i < 100; ++i) CHECK(seen[i] == i);
}

TEST_CASE("make_batch normalizes and keeps shape") {
  auto ds = data::synthesize_split(small_spec(), "test");
  data::AugmentFlags aug;  // normalize only
  auto t = data::make_batch(ds, {0, 3}, aug, nullptr);
  CHECK(t.n == 2);
  CHECK(t.c == 3);
  CHECK(t.h == 16);
  CHECK(t.w == 16);
  for (float v : t.data) {
    CHECK(v >= -2.01f);
    CHECK(v <= 2.01f);
  }
  // Raw decode without normalization stays in [0,1].
  aug.normalize = false;
  auto raw = data::make_batch(ds, {0}, aug, nullptr);
  for (float v : raw.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("augmentation is seeded and only active when requested") {
  auto ds = data::synthesize_split(small_spec(), "train");
  data::AugmentFlags aug;
  aug.crop = true;
  aug.flip = true;
  std::mt19937_64 r1(9), r2(9), r3(10);
  auto a = data::make_batch(ds, {0, 1, 2}, aug, &r1);
  auto b = data::make_batch(ds, {0, 1, 2}, aug, &r2);
  auto c = data::make_batch(ds, {0, 1, 2}, aug, &r3);
  CHECK(a.data == b.data);
  CHECK(a.data != c.data);

  data::AugmentFlags off;
  auto d = data::make_batch(ds, {0, 1, 2}, off, nullptr);
  auto e = data::make_batch(ds, {0, 1, 2}, off, nullptr);
  CHECK(d.data == e.data);
}

TEST_CASE("invalid specs and bad labels are rejected") {
  auto s = small_spec();
  s.num_classes = 0;
  CHECK_THROWS(s.validate());
  s = small_spec();
  s.train_per_class = 0;
  CHECK_THROWS(s.validate());
  s = small_spec();
  s.source = data::DatasetSpec::Source::kCifarBinaryDir;
  s.path = "/nonexistent/dataset/dir";
  CHECK_THROWS(data::load_split(s, "train"));
}
