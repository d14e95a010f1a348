#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mcld/nn/layers.hpp"

namespace mcld::data {

struct AugmentFlags {
  bool crop = false;       // random crop with 4-pixel zero padding
  bool flip = false;       // random horizontal flip
  bool normalize = true;   // map [0,1] pixels to (x - 0.5) / 0.25
};

struct DatasetSpec {
  enum class Source { kCifarBinaryDir, kImageFolder, kSynthetic };

  Source source = Source::kSynthetic;
  std::string path;  // directory holding the stored dataset
  int num_classes = 10;
  int channels = 3;
  int image_h = 16;
  int image_w = 16;
  int train_per_class = 100;  // synthetic only
  int test_per_class = 20;    // synthetic only
  double noise_sigma = 0.25;      // synthetic pixel noise
  double signal_amplitude = 0.35; // synthetic class-template strength
  AugmentFlags augment;
  uint64_t seed = 0;

  void validate() const;
};

DatasetSpec::Source source_from_string(const std::string& s);
std::string to_string(DatasetSpec::Source s);

// In-memory split: raw byte pixels in CIFAR plane order plus labels.
struct Dataset {
  int num_classes = 0;
  int channels = 0, h = 0, w = 0;
  std::vector<uint8_t> pixels;  // size() * channels * h * w
  std::vector<int> labels;

  int size() const { return static_cast<int>(labels.size()); }
  int record_bytes() const { return channels * h * w; }
};

// Deterministic class-conditional pattern images: each class has a fixed
// low-frequency template, samples add Gaussian pixel noise.
Dataset synthesize_split(const DatasetSpec& spec, const std::string& split);

// Persists train/test splits in the CIFAR binary record layout
// (1 label byte + channels*h*w pixel bytes, row-major planes) plus a
// manifest.json with counts and checksums. Byte-identical per seed.
void synthesize_dataset(const DatasetSpec& spec, const std::string& out_dir);

// Loads one split ("train" or "test"). For kSynthetic with an empty path the
// split is generated in memory; otherwise files are read from spec.path.
Dataset load_split(const DatasetSpec& spec, const std::string& split);

// Seeded epoch shuffle: batches of `batch_size` indices, final partial batch
// kept. Identical for identical (seed, epoch).
std::vector<std::vector<int>> epoch_batches(int n, int batch_size,
                                            uint64_t seed, int epoch);

// Decodes the selected records to a float NCHW batch, applying augmentation.
// aug_rng may be null when neither crop nor flip is set.
nn::Tensor4 make_batch(const Dataset& ds, const std::vector<int>& indices,
                       const AugmentFlags& augment, std::mt19937_64* aug_rng);

}  // namespace mcld::data
