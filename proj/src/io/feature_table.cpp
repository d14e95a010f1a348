#include "mcld/io/feature_table.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mcld/util/hash.hpp"

using nlohmann::json;

namespace mcld::io {

void save_feature_table(const std::string& path_prefix, const FeatureTable& t) {
  if (t.features.rows() != static_cast<long>(t.labels.size())) {
    throw std::invalid_argument("feature table rows/labels mismatch");
  }
  std::vector<char> blob;
  const size_t fbytes = static_cast<size_t>(t.features.size()) * sizeof(float);
  const size_t lbytes = t.labels.size() * sizeof(int32_t);
  blob.resize(fbytes + lbytes);
  // Eigen default storage is column-major, which is the documented layout.
  std::memcpy(blob.data(), t.features.data(), fbytes);
  std::vector<int32_t> labels32(t.labels.begin(), t.labels.end());
  std::memcpy(blob.data() + fbytes, labels32.data(), lbytes);

  std::ofstream out(path_prefix + ".bin", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path_prefix + ".bin");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));

  json manifest;
  manifest["format_version"] = 1;
  manifest["rows"] = t.features.rows();
  manifest["cols"] = t.features.cols();
  manifest["dtype"] = "float32_colmajor_then_int32_labels";
  manifest["checksum_fnv1a64"] = to_hex(fnv1a64(blob.data(), blob.size()));
  std::ofstream mf(path_prefix + ".manifest.json");
  mf << manifest.dump(2) << "\n";
}

FeatureTable load_feature_table(const std::string& path_prefix) {
  std::ifstream mf(path_prefix + ".manifest.json");
  if (!mf) throw std::runtime_error("missing manifest for " + path_prefix);
  json manifest = json::parse(mf);
  const long rows = manifest["rows"];
  const long cols = manifest["cols"];

  std::ifstream in(path_prefix + ".bin", std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path_prefix + ".bin");
  std::vector<char> blob{std::istreambuf_iterator<char>(in),
                         std::istreambuf_iterator<char>()};
  const size_t fbytes = static_cast<size_t>(rows) * cols * sizeof(float);
  const size_t lbytes = static_cast<size_t>(rows) * sizeof(int32_t);
  if (blob.size() != fbytes + lbytes) {
    throw std::runtime_error("feature table size mismatch: " + path_prefix);
  }
  const std::string expect = manifest["checksum_fnv1a64"];
  if (to_hex(fnv1a64(blob.data(), blob.size())) != expect) {
    throw std::runtime_error("feature table checksum mismatch: " + path_prefix);
  }

  FeatureTable t;
  t.features.resize(rows, cols);
  std::memcpy(t.features.data(), blob.data(), fbytes);
  std::vector<int32_t> labels32(rows);
  std::memcpy(labels32.data(), blob.data() + fbytes, lbytes);
  t.labels.assign(labels32.begin(), labels32.end());
  return t;
}

}  // namespace mcld::io
