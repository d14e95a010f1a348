#include "mcld/viz/correlation.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "mcld/viz/render.hpp"

namespace mcld::viz {

namespace {

// Pearson correlation matrix over columns; NaN where a column is constant.
Eigen::MatrixXd column_correlation(const Eigen::MatrixXd& logits) {
  const long n = logits.rows();
  const long c = logits.cols();
  if (n < 2) throw std::invalid_argument("correlation needs >= 2 samples");
  Eigen::MatrixXd centered = logits.rowwise() - logits.colwise().mean();
  Eigen::VectorXd norms(c);
  for (long j = 0; j < c; ++j) norms[j] = centered.col(j).norm();
  Eigen::MatrixXd corr(c, c);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (long a = 0; a < c; ++a) {
    for (long b = 0; b < c; ++b) {
      if (norms[a] == 0.0 || norms[b] == 0.0) {
        corr(a, b) = nan;
      } else {
        corr(a, b) = centered.col(a).dot(centered.col(b)) / (norms[a] * norms[b]);
      }
    }
  }
  return corr;
}

}  // namespace

Eigen::MatrixXd correlation_diff_matrix(const Eigen::MatrixXd& student_logits,
                                        const Eigen::MatrixXd& teacher_logits) {
  if (student_logits.rows() != teacher_logits.rows() ||
      student_logits.cols() != teacher_logits.cols()) {
    throw std::invalid_argument("logit sets must cover the same samples");
  }
  const Eigen::MatrixXd cs = column_correlation(student_logits);
  const Eigen::MatrixXd ct = column_correlation(teacher_logits);
  return (cs - ct).cwiseAbs();  // NaN propagates through masked cells
}

void write_correlation_diff(const Eigen::MatrixXd& diff,
                            const std::string& out_prefix) {
  double vmax = 0.0;
  for (long i = 0; i < diff.rows(); ++i) {
    for (long j = 0; j < diff.cols(); ++j) {
      if (std::isfinite(diff(i, j))) vmax = std::max(vmax, diff(i, j));
    }
  }
  std::ofstream f(out_prefix + ".csv");
  if (!f) throw std::runtime_error("cannot write " + out_prefix + ".csv");
  f << "# correlation_diff sidecar\n";
  f << "# vmin,0\n";
  f << "# vmax," << vmax << "\n";
  f.precision(17);
  for (long i = 0; i < diff.rows(); ++i) {
    for (long j = 0; j < diff.cols(); ++j) {
      if (j) f << ',';
      if (std::isfinite(diff(i, j))) {
        f << diff(i, j);
      } else {
        f << "nan";
      }
    }
    f << "\n";
  }
  f.close();
  render_correlation_heatmap(out_prefix + ".csv", out_prefix + ".ppm");
}

void render_correlation_heatmap(const std::string& csv_path,
                                const std::string& ppm_path) {
  std::ifstream f(csv_path);
  if (!f) throw std::runtime_error("cannot read " + csv_path);
  double vmax = 1.0;
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# vmax,", 0) == 0) vmax = std::stod(line.substr(7));
      continue;
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      row.push_back(cell == "nan" ? std::numeric_limits<double>::quiet_NaN()
                                  : std::stod(cell));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty sidecar: " + csv_path);

  const int c = static_cast<int>(rows.size());
  const int cell_px = std::max(4, 256 / c);
  Canvas canvas(c * cell_px + 2, c * cell_px + 2, Color{255, 255, 255});
  const Color masked{180, 180, 180};
  for (int i = 0; i < c; ++i) {
    for (int j = 0; j < c; ++j) {
      const double v = rows[i][j];
      const Color col = std::isfinite(v)
                            ? heat_color(vmax > 0.0 ? v / vmax : 0.0)
                            : masked;
      canvas.fill_rect(1 + j * cell_px, 1 + i * cell_px,
                       j * cell_px + cell_px, i * cell_px + cell_px, col);
    }
  }
  canvas.frame(Color{0, 0, 0});
  canvas.save_ppm(ppm_path);
}

}  // namespace mcld::viz
