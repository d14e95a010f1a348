#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mcld::viz {

struct TsneConfig {
  double perplexity = 30.0;  // clamped to (n - 1) / 3
  int iterations = 500;
  double learning_rate = 200.0;
  uint64_t seed = 0;
};

// Exact (O(n^2)) t-SNE to 2-D. Throws on < 10 points or all-identical input.
Eigen::MatrixXd tsne_embed(const Eigen::MatrixXd& points, TsneConfig cfg);

// Embeds, writes `<prefix>.csv` (x,y,label rows) and `<prefix>.ppm`
// (class-colored scatter rendered from the sidecar alone).
void tsne_plot(const Eigen::MatrixXd& points, const std::vector<int>& labels,
               uint64_t seed, const std::string& out_prefix);

void render_tsne_scatter(const std::string& csv_path,
                         const std::string& ppm_path);

}  // namespace mcld::viz
