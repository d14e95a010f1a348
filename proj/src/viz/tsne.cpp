#include "mcld/viz/tsne.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mcld/viz/render.hpp"

namespace mcld::viz {

namespace {

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x) {
  const long n = x.rows();
  Eigen::VectorXd sq = x.rowwise().squaredNorm();
  Eigen::MatrixXd d = -2.0 * x * x.transpose();
  d.colwise() += sq;
  d.rowwise() += sq.transpose();
  return d.cwiseMax(0.0);
}

// Conditional affinities with a per-point bandwidth matched to perplexity.
Eigen::MatrixXd joint_affinities(const Eigen::MatrixXd& dist, double perplexity) {
  const long n = dist.rows();
  const double target_entropy = std::log(perplexity);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (long i = 0; i < n; ++i) {
    double beta_lo = 0.0, beta_hi = 1e12, beta = 1.0;
    Eigen::VectorXd row;
    for (int it = 0; it < 64; ++it) {
      row = (-beta * dist.row(i).transpose().array()).exp();
      row[i] = 0.0;
      const double sum = row.sum();
      if (sum <= 0.0) {
        beta_hi = beta;
        beta = 0.5 * (beta_lo + beta_hi);
        continue;
      }
      row /= sum;
      double entropy = 0.0;
      for (long j = 0; j < n; ++j) {
        if (row[j] > 1e-300) entropy -= row[j] * std::log(row[j]);
      }
      if (std::abs(entropy - target_entropy) < 1e-5) break;
      if (entropy > target_entropy) {
        beta_lo = beta;
        beta = (beta_hi > 1e11) ? beta * 2.0 : 0.5 * (beta_lo + beta_hi);
      } else {
        beta_hi = beta;
        beta = 0.5 * (beta_lo + beta_hi);
      }
    }
    p.row(i) = row.transpose();
  }
  Eigen::MatrixXd joint = (p + p.transpose()) / (2.0 * n);
  return joint.cwiseMax(1e-12);
}

}  // namespace

Eigen::MatrixXd tsne_embed(const Eigen::MatrixXd& points, TsneConfig cfg) {
  const long n = points.rows();
  if (n < 10) throw std::invalid_argument("tsne: need at least 10 points");
  Eigen::MatrixXd dist = squared_distances(points);
  if (dist.maxCoeff() <= 0.0) {
    throw std::invalid_argument("tsne: degenerate input (all points identical)");
  }
  const double perplexity =
      std::min(cfg.perplexity, std::max(2.0, (n - 1) / 3.0));
  Eigen::MatrixXd p = joint_affinities(dist, perplexity);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> init(0.0, 1e-4);
  Eigen::MatrixXd y(n, 2), vel = Eigen::MatrixXd::Zero(n, 2);
  for (long i = 0; i < n; ++i) {
    y(i, 0) = init(rng);
    y(i, 1) = init(rng);
  }

  constexpr int kExaggerationIters = 100;
  constexpr double kExaggeration = 12.0;
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const double exag = iter < kExaggerationIters ? kExaggeration : 1.0;
    const double momentum = iter < 250 ? 0.5 : 0.8;

    // Student-t kernel in the embedding.
    Eigen::MatrixXd num = (1.0 + squared_distances(y).array()).inverse().matrix();
    num.diagonal().setZero();
    const double qsum = std::max(num.sum(), 1e-12);

    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, 2);
    for (long i = 0; i < n; ++i) {
      for (long j = 0; j < n; ++j) {
        if (j == i) continue;
        const double coeff =
            4.0 * (exag * p(i, j) - num(i, j) / qsum) * num(i, j);
        grad.row(i) += coeff * (y.row(i) - y.row(j));
      }
    }
    vel = momentum * vel - cfg.learning_rate * grad;
    y += vel;
    y.rowwise() -= y.colwise().mean();  // keep the embedding centered
  }
  return y;
}

void tsne_plot(const Eigen::MatrixXd& points, const std::vector<int>& labels,
               uint64_t seed, const std::string& out_prefix) {
  if (points.rows() != static_cast<long>(labels.size())) {
    throw std::invalid_argument("tsne_plot: labels/points mismatch");
  }
  if (std::set<int>(labels.begin(), labels.end()).size() < 2) {
    throw std::invalid_argument("tsne_plot: need at least 2 classes");
  }
  TsneConfig cfg;
  cfg.seed = seed;
  Eigen::MatrixXd y = tsne_embed(points, cfg);

  std::ofstream f(out_prefix + ".csv");
  if (!f) throw std::runtime_error("cannot write " + out_prefix + ".csv");
  f.precision(17);
  f << "x,y,label\n";
  for (long i = 0; i < y.rows(); ++i) {
    f << y(i, 0) << ',' << y(i, 1) << ',' << labels[i] << "\n";
  }
  f.close();
  render_tsne_scatter(out_prefix + ".csv", out_prefix + ".ppm");
}

void render_tsne_scatter(const std::string& csv_path,
                         const std::string& ppm_path) {
  std::ifstream f(csv_path);
  if (!f) throw std::runtime_error("cannot read " + csv_path);
  std::string line;
  std::getline(f, line);  // header
  std::vector<double> xs, ys;
  std::vector<int> labels;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a, b, c;
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    std::getline(ss, c, ',');
    xs.push_back(std::stod(a));
    ys.push_back(std::stod(b));
    labels.push_back(std::stoi(c));
  }
  if (xs.empty()) throw std::runtime_error("empty sidecar: " + csv_path);

  double xmin = xs[0], xmax = xs[0], ymin = ys[0], ymax = ys[0];
  for (size_t i = 0; i < xs.size(); ++i) {
    xmin = std::min(xmin, xs[i]);
    xmax = std::max(xmax, xs[i]);
    ymin = std::min(ymin, ys[i]);
    ymax = std::max(ymax, ys[i]);
  }
  const double spanx = std::max(xmax - xmin, 1e-9);
  const double spany = std::max(ymax - ymin, 1e-9);

  constexpr int kSize = 420, kMargin = 12;
  Canvas canvas(kSize, kSize, Color{255, 255, 255});
  for (size_t i = 0; i < xs.size(); ++i) {
    const int px = kMargin + static_cast<int>((xs[i] - xmin) / spanx *
                                              (kSize - 2 * kMargin));
    const int py = kMargin + static_cast<int>((ys[i] - ymin) / spany *
                                              (kSize - 2 * kMargin));
    canvas.disc(px, py, 3, class_color(labels[i]));
  }
  canvas.frame(Color{0, 0, 0});
  canvas.save_ppm(ppm_path);
}

}  // namespace mcld::viz
