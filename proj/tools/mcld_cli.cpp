#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mcld/data/dataset.hpp"
#include "mcld/io/checkpoint.hpp"
#include "mcld/io/feature_table.hpp"
#include "mcld/train/engine.hpp"
#include "mcld/transfer.hpp"
#include "mcld/viz/correlation.hpp"
#include "mcld/viz/timing.hpp"
#include "mcld/viz/tsne.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out;
  int64_t seed = -1;
  std::string method;
  double tau = -1.0;
  int queue_capacity = -1;
  std::string mask_mode;
  int warmup_end_epoch = -1;
  int epochs = -1;
  int batch_size = -1;
  std::string ablation_flags;
};

void add_common_options(CLI::App* cmd, CommonOpts* o) {
  cmd->add_option("--config", o->config_path, "Run config JSON file");
  cmd->add_option("--out", o->out, "Output directory (or path prefix)");
  cmd->add_option("--seed", o->seed, "Override the run seed");
  cmd->add_option("--method", o->method, "mcld | kd | none");
  cmd->add_option("--tau", o->tau, "Contrastive temperature");
  cmd->add_option("--queue-capacity", o->queue_capacity, "Negative queue size");
  cmd->add_option("--mask-mode", o->mask_mode,
                  "exclude | literal_multiply");
  cmd->add_option("--warmup-end-epoch", o->warmup_end_epoch,
                  "Epoch at which the category weight reaches 1");
  cmd->add_option("--epochs", o->epochs, "Training epochs");
  cmd->add_option("--batch-size", o->batch_size, "Mini-batch size");
  cmd->add_option("--ablation-flags", o->ablation_flags,
                  "Comma list of enabled modules: instance,sample,category");
}

// Output root: --out wins, then MCLD_OUT_ROOT, then the working directory.
std::string resolve_out(const std::string& out, const std::string& fallback) {
  if (!out.empty()) return out;
  if (const char* root = std::getenv("MCLD_OUT_ROOT")) {
    return (fs::path(root) / fallback).string();
  }
  return fallback;
}

mcld::train::DistillRunConfig load_config(const CommonOpts& o) {
  mcld::train::DistillRunConfig cfg;
  if (!o.config_path.empty()) {
    std::ifstream f(o.config_path);
    if (!f) throw std::runtime_error("unreadable config: " + o.config_path);
    cfg = mcld::train::DistillRunConfig::from_json(
        json::parse(f, nullptr, true, true));
  }
  if (o.seed >= 0) cfg.seed = static_cast<uint64_t>(o.seed);
  if (!o.method.empty()) cfg.method = mcld::train::method_from_string(o.method);
  if (o.tau > 0) cfg.loss.tau = o.tau;
  if (o.queue_capacity > 0) cfg.loss.queue_capacity = o.queue_capacity;
  if (!o.mask_mode.empty()) {
    cfg.loss.mask_mode = mcld::mask_mode_from_string(o.mask_mode);
  }
  if (o.warmup_end_epoch > 0) cfg.loss.warmup_end_epoch = o.warmup_end_epoch;
  if (o.epochs > 0) cfg.epochs = o.epochs;
  if (o.batch_size > 0) cfg.batch_size = o.batch_size;
  if (!o.ablation_flags.empty()) {
    cfg.ablation.instance = false;
    cfg.ablation.sample = false;
    cfg.ablation.category = false;
    std::stringstream ss(o.ablation_flags);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok == "instance") cfg.ablation.instance = true;
      else if (tok == "sample") cfg.ablation.sample = true;
      else if (tok == "category") cfg.ablation.category = true;
      else if (!tok.empty()) {
        throw std::runtime_error("unknown ablation flag: " + tok);
      }
    }
  }
  return cfg;
}

void write_effective(const json& j, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream f(dir / "effective_config.json");
  f << j.dump(2) << "\n";
}

mcld::nn::Model load_model(const std::string& ckpt_path) {
  return mcld::io::model_from_checkpoint(mcld::io::load_checkpoint(ckpt_path));
}

Eigen::MatrixXd collect_logits(mcld::nn::Model& model,
                               const mcld::data::Dataset& ds, int batch_size) {
  Eigen::MatrixXd logits(ds.size(), model.spec().num_classes);
  mcld::data::AugmentFlags eval_aug;
  for (int start = 0; start < ds.size(); start += batch_size) {
    std::vector<int> idx;
    for (int i = start; i < std::min(ds.size(), start + batch_size); ++i) {
      idx.push_back(i);
    }
    auto out = model.forward(mcld::data::make_batch(ds, idx, eval_aug, nullptr));
    logits.middleRows(start, static_cast<long>(idx.size())) =
        out.logits.cast<double>();
  }
  return logits;
}

int run_synth_data(const CommonOpts& o) {
  auto cfg = load_config(o);
  const std::string out = resolve_out(o.out, "dataset");
  mcld::data::DatasetSpec spec = cfg.dataset;
  if (o.seed >= 0) spec.seed = static_cast<uint64_t>(o.seed);
  mcld::data::synthesize_dataset(spec, out);
  std::cout << "dataset written to " << out << "\n";
  return 0;
}

int run_train_teacher(const CommonOpts& o) {
  auto cfg = load_config(o);
  cfg.method = mcld::train::Method::kNone;
  cfg.output_dir = resolve_out(o.out, "teacher_run");
  auto result = mcld::train::train_teacher(cfg);
  std::cout << "teacher best top1 " << result.best_top1 << ", checkpoint "
            << result.checkpoint_path << "\n";
  return 0;
}

int run_distill(const CommonOpts& o, bool resume) {
  auto cfg = load_config(o);
  cfg.output_dir = resolve_out(o.out, "distill_run");
  auto result = mcld::train::distill(cfg, resume);
  std::cout << "student best top1 " << result.best_top1 << ", final top1 "
            << result.final_top1 << ", checkpoint " << result.checkpoint_path
            << "\n";
  return 0;
}

int run_eval(const CommonOpts& o, const std::string& ckpt_path,
             const std::string& split) {
  auto cfg = load_config(o);
  auto model = load_model(ckpt_path);
  auto ds = mcld::data::load_split(cfg.dataset, split);
  auto [top1, top5] = mcld::train::evaluate(model, ds);
  std::cout << "split " << split << " top1 " << top1 << " top5 " << top5
            << "\n";
  return 0;
}

int run_ablate(const CommonOpts& o, const std::string& axes_csv,
               const std::string& warmup_csv) {
  auto cfg = load_config(o);
  const std::string out = resolve_out(o.out, "ablation");
  cfg.output_dir = out;
  std::vector<std::string> axes;
  std::stringstream ss(axes_csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) axes.push_back(tok);
  }
  std::vector<int> warmups;
  std::stringstream ws(warmup_csv);
  while (std::getline(ws, tok, ',')) {
    if (!tok.empty()) warmups.push_back(std::stoi(tok));
  }
  auto rows = mcld::train::run_ablation_grid(
      cfg, axes, warmups, (fs::path(out) / "ablation.csv").string());
  std::cout << rows.size() << " ablation rows written to " << out << "\n";
  return 0;
}

int run_probe(const CommonOpts& o, const std::string& ckpt_path) {
  auto cfg = load_config(o);
  const fs::path out = resolve_out(o.out, "probe");
  write_effective(cfg.to_json(), out);
  auto model = load_model(ckpt_path);
  model.set_frozen(true);
  auto train_ds = mcld::data::load_split(cfg.dataset, "train");
  auto test_ds = mcld::data::load_split(cfg.dataset, "test");
  auto train_feats = mcld::transfer::extract_features(model, train_ds);
  auto test_feats = mcld::transfer::extract_features(model, test_ds);
  mcld::io::save_feature_table((out / "train_features").string(), train_feats);
  mcld::io::save_feature_table((out / "test_features").string(), test_feats);
  const double top1 = mcld::transfer::linear_probe(
      train_feats, test_feats, cfg.dataset.num_classes, cfg.seed);
  std::ofstream rf(out / "probe_result.json");
  rf << json{{"top1", top1}}.dump(2) << "\n";
  std::cout << "probe top1 " << top1 << "\n";
  return 0;
}

int run_plot_tsne(const CommonOpts& o, const std::string& features_prefix,
                  int max_points) {
  const std::string out = resolve_out(o.out, "tsne");
  auto table = mcld::io::load_feature_table(features_prefix);
  long n = table.features.rows();
  if (max_points > 0 && n > max_points) n = max_points;
  Eigen::MatrixXd pts = table.features.topRows(n).cast<double>();
  std::vector<int> labels(table.labels.begin(), table.labels.begin() + n);
  const uint64_t seed = o.seed >= 0 ? static_cast<uint64_t>(o.seed) : 0;
  mcld::viz::tsne_plot(pts, labels, seed, out);
  std::cout << "t-SNE written to " << out << ".{csv,ppm}\n";
  return 0;
}

int run_plot_corr(const CommonOpts& o, const std::string& student_ckpt,
                  const std::string& teacher_ckpt, const std::string& sidecar,
                  const std::string& split) {
  const std::string out = resolve_out(o.out, "correlation_diff");
  if (!sidecar.empty()) {
    mcld::viz::render_correlation_heatmap(sidecar, out + ".ppm");
    std::cout << "heatmap re-rendered to " << out << ".ppm\n";
    return 0;
  }
  auto cfg = load_config(o);
  auto student = load_model(student_ckpt);
  auto teacher = load_model(teacher_ckpt);
  auto ds = mcld::data::load_split(cfg.dataset, split);
  const Eigen::MatrixXd sl = collect_logits(student, ds, 128);
  const Eigen::MatrixXd tl = collect_logits(teacher, ds, 128);
  mcld::viz::write_correlation_diff(
      mcld::viz::correlation_diff_matrix(sl, tl), out);
  std::cout << "correlation diff written to " << out << ".{csv,ppm}\n";
  return 0;
}

int run_plot_timing(const CommonOpts& o,
                    const std::vector<std::string>& metric_files,
                    const std::vector<std::string>& names) {
  const std::string out = resolve_out(o.out, "timing");
  std::vector<mcld::viz::TimingPoint> pts;
  for (size_t i = 0; i < metric_files.size(); ++i) {
    const std::string name =
        i < names.size() ? names[i] : fs::path(metric_files[i]).parent_path()
                                          .filename().string();
    pts.push_back(mcld::viz::timing_point_from_metrics(metric_files[i], name));
  }
  mcld::viz::timing_plot(pts, out);
  std::cout << pts.size() << " runs plotted to " << out << ".{csv,ppm}\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-perspective contrastive logit distillation pipeline"};
  app.require_subcommand(1);

  CommonOpts o;
  std::string ckpt_path, student_ckpt, teacher_ckpt, split = "test";
  std::string axes_csv = "instance,sample,category", warmup_csv;
  std::string features_prefix, sidecar;
  int max_points = 400;
  bool resume = false;
  std::vector<std::string> metric_files, names;

  auto* synth = app.add_subcommand("synth-data", "Generate a synthetic dataset");
  add_common_options(synth, &o);

  auto* teach = app.add_subcommand("train-teacher", "Supervised teacher training");
  add_common_options(teach, &o);

  auto* dist = app.add_subcommand("distill", "Distill a student from a teacher");
  add_common_options(dist, &o);
  dist->add_flag("--resume", resume, "Continue from output_dir/last_state.bin");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common_options(eval, &o);
  eval->add_option("--checkpoint", ckpt_path, "Model checkpoint")->required();
  eval->add_option("--split", split, "train | test");

  auto* abl = app.add_subcommand("ablate", "Run an ablation grid");
  add_common_options(abl, &o);
  abl->add_option("--axes", axes_csv, "Module axes to enumerate");
  abl->add_option("--warmup-values", warmup_csv,
                  "Explicit warm-up end epochs (optional axis)");

  auto* probe = app.add_subcommand("probe", "Linear probe on frozen features");
  add_common_options(probe, &o);
  probe->add_option("--checkpoint", ckpt_path, "Feature extractor checkpoint")
      ->required();

  auto* ptsne = app.add_subcommand("plot-tsne", "2-D feature embedding plot");
  add_common_options(ptsne, &o);
  ptsne->add_option("--features", features_prefix,
                    "Feature table path prefix")->required();
  ptsne->add_option("--max-points", max_points, "Cap on embedded points");

  auto* pcorr = app.add_subcommand("plot-corr",
                                   "Class-correlation difference heatmap");
  add_common_options(pcorr, &o);
  pcorr->add_option("--student-checkpoint", student_ckpt, "Student checkpoint");
  pcorr->add_option("--teacher-checkpoint", teacher_ckpt, "Teacher checkpoint");
  pcorr->add_option("--split", split, "train | test");
  pcorr->add_option("--from-sidecar", sidecar,
                    "Re-render from an existing sidecar CSV");

  auto* ptime = app.add_subcommand("plot-timing",
                                   "Per-batch time vs accuracy scatter");
  add_common_options(ptime, &o);
  ptime->add_option("--metrics", metric_files, "metrics.jsonl files")
      ->required();
  ptime->add_option("--names", names, "Labels for the runs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return run_synth_data(o);
    if (teach->parsed()) return run_train_teacher(o);
    if (dist->parsed()) return run_distill(o, resume);
    if (eval->parsed()) return run_eval(o, ckpt_path, split);
    if (abl->parsed()) return run_ablate(o, axes_csv, warmup_csv);
    if (probe->parsed()) return run_probe(o, ckpt_path);
    if (ptsne->parsed()) return run_plot_tsne(o, features_prefix, max_points);
    if (pcorr->parsed()) {
      if (sidecar.empty() && (student_ckpt.empty() || teacher_ckpt.empty())) {
        std::cerr << "error: plot-corr needs both checkpoints or a sidecar\n";
        return 2;
      }
      return run_plot_corr(o, student_ckpt, teacher_ckpt, sidecar, split);
    }
    if (ptime->parsed()) return run_plot_timing(o, metric_files, names);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "run error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
