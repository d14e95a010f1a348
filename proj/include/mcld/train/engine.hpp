#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcld/data/dataset.hpp"
#include "mcld/losses.hpp"
#include "mcld/nn/model.hpp"

namespace mcld::train {

enum class Method { kMcld, kKd, kNone };

Method method_from_string(const std::string& s);
std::string to_string(Method m);

struct OptimizerConfig {
  double lr = 0.02;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::vector<int> lr_decay_epochs;  // strictly increasing, < epochs
  double lr_decay_factor = 0.1;
  double max_grad_norm = 5.0;  // global clip; <= 0 disables
};

struct DistillRunConfig {
  nn::ModelSpec teacher;
  std::string teacher_checkpoint;
  nn::ModelSpec student;
  data::DatasetSpec dataset;
  LossConfig loss;
  Method method = Method::kMcld;
  ComponentFlags ablation;
  OptimizerConfig optimizer;
  int epochs = 12;
  int batch_size = 64;
  uint64_t seed = 1;
  std::string output_dir;

  // Fills derived defaults: warmup_end_epoch <= 0 becomes
  // round(155/240 * epochs); empty lr_decay_epochs becomes the
  // {150,180,210}/240 schedule scaled to `epochs`.
  void resolve_defaults();
  void validate() const;

  nlohmann::json to_json() const;
  static DistillRunConfig from_json(const nlohmann::json& j);
  uint64_t fingerprint() const;
};

struct MetricRecord {
  int epoch = 0;
  std::string split;
  double loss_total = 0, loss_inst = 0, loss_samp = 0, loss_cate = 0;
  double loss_kd = 0, loss_ce = 0;
  double omega = 0;
  double top1 = 0, top5 = 0;
  double wall_seconds_per_batch = 0;

  nlohmann::json to_json() const;
  static std::string csv_header();
  std::string to_csv() const;
};

struct RunResult {
  std::string checkpoint_path;
  std::vector<MetricRecord> history;
  double best_top1 = 0;
  double final_top1 = 0;
};

// Supervised CE training of the teacher spec; requires method == kNone.
RunResult train_teacher(const DistillRunConfig& config);

// Distillation of the student against the frozen teacher checkpoint.
// With resume set, continues from output_dir/last_state.bin when present.
RunResult distill(const DistillRunConfig& config, bool resume = false);

// (top1, top5) over the split, no augmentation.
std::pair<double, double> evaluate(nn::Model& model, const data::Dataset& ds,
                                   int batch_size = 128);

// Accuracy from precomputed logits, shared by evaluate and the tests.
std::pair<double, double> accuracy_from_logits(const Eigen::MatrixXf& logits,
                                               const std::vector<int>& labels);

}  // namespace mcld::train

namespace mcld::train {

struct AblationRow {
  bool instance = false, sample = false, category = false;
  int warmup_end_epoch = 0;
  double top1 = 0;
  double delta = 0;  // vs the all-off (CE-only) row
};

// One distill run per combination of the requested axes, identical seeds.
// Module axes enumerate on/off; the warmup axis takes explicit values.
// Writes a consolidated CSV when out_csv is nonempty.
std::vector<AblationRow> run_ablation_grid(const DistillRunConfig& base,
                                           const std::vector<std::string>& module_axes,
                                           const std::vector<int>& warmup_values,
                                           const std::string& out_csv);

}  // namespace mcld::train
