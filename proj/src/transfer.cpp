#include "mcld/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>
#include <set>

#include "mcld/train/engine.hpp"

namespace mcld::transfer {

io::FeatureTable extract_features(nn::Model& model, const data::Dataset& ds,
                                  int batch_size) {
  if (ds.size() == 0) throw std::invalid_argument("extract_features: empty split");
  data::AugmentFlags eval_aug;
  io::FeatureTable table;
  table.features.resize(ds.size(), model.spec().feature_dim());
  table.labels = ds.labels;
  for (int start = 0; start < ds.size(); start += batch_size) {
    const int end = std::min(ds.size(), start + batch_size);
    std::vector<int> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    nn::Tensor4 images = data::make_batch(ds, idx, eval_aug, nullptr);
    table.features.middleRows(start, end - start) =
        model.forward(images).features;
  }
  return table;
}

double linear_probe(const io::FeatureTable& train, const io::FeatureTable& test,
                    int num_classes, uint64_t seed, ProbeConfig cfg) {
  if (train.labels.empty() || test.labels.empty()) {
    throw std::invalid_argument("linear_probe: empty split");
  }
  std::set<int> seen(train.labels.begin(), train.labels.end());
  if (static_cast<int>(seen.size()) < num_classes) {
    std::cerr << "linear_probe: warning: only " << seen.size() << " of "
              << num_classes << " classes present in train split\n";
  }

  const int fdim = static_cast<int>(train.features.cols());
  const int n = static_cast<int>(train.features.rows());
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> init(0.0f, 0.01f);
  Eigen::MatrixXf w(num_classes, fdim);
  for (int i = 0; i < w.rows(); ++i) {
    for (int j = 0; j < w.cols(); ++j) w(i, j) = init(rng);
  }
  Eigen::VectorXf bias = Eigen::VectorXf::Zero(num_classes);

  auto eval_top1 = [&](const io::FeatureTable& split) {
    Eigen::MatrixXf logits = split.features * w.transpose();
    logits.rowwise() += bias.transpose();
    return train::accuracy_from_logits(logits, split.labels).first;
  };

  double lr = cfg.lr;
  double best_train = -1.0;
  int stall = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch == static_cast<int>(0.6 * cfg.epochs) ||
        epoch == static_cast<int>(0.85 * cfg.epochs)) {
      lr *= cfg.lr_decay;
    }
    const auto batches = data::epoch_batches(n, cfg.batch_size, seed, epoch);
    for (const std::vector<int>& idx : batches) {
      const int b = static_cast<int>(idx.size());
      Eigen::MatrixXf x(b, fdim);
      for (int i = 0; i < b; ++i) x.row(i) = train.features.row(idx[i]);
      Eigen::MatrixXf logits = x * w.transpose();
      logits.rowwise() += bias.transpose();

      // softmax CE gradient
      Eigen::MatrixXf g(b, num_classes);
      for (int i = 0; i < b; ++i) {
        Eigen::VectorXf row = logits.row(i);
        const float m = row.maxCoeff();
        Eigen::VectorXf e = (row.array() - m).exp();
        e /= e.sum();
        e[train.labels[idx[i]]] -= 1.0f;
        g.row(i) = e / static_cast<float>(b);
      }
      w -= static_cast<float>(lr) * (g.transpose() * x);
      bias -= static_cast<float>(lr) * g.colwise().sum().transpose();
    }
    const double acc = eval_top1(train);
    if (acc > best_train + 1e-9) {
      best_train = acc;
      stall = 0;
    } else if (++stall >= cfg.plateau_patience) {
      break;
    }
  }
  return eval_top1(test);
}

}  // namespace mcld::transfer
