#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mcld::io {

// Frozen-extractor features for one split, with their labels.
struct FeatureTable {
  Eigen::MatrixXf features;  // rows x feature_dim
  std::vector<int> labels;   // rows
};

// Writes `<path>.bin` (column-major float32 feature block followed by int32
// labels) and `<path>.manifest.json` (rows, cols, checksum).
void save_feature_table(const std::string& path_prefix, const FeatureTable& t);

FeatureTable load_feature_table(const std::string& path_prefix);

}  // namespace mcld::io
