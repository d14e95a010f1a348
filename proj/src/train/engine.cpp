#include "mcld/train/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "mcld/io/checkpoint.hpp"
#include "mcld/kd.hpp"
#include "mcld/queue.hpp"
#include "mcld/util/hash.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mcld::train {

Method method_from_string(const std::string& s) {
  if (s == "mcld") return Method::kMcld;
  if (s == "kd") return Method::kKd;
  if (s == "none") return Method::kNone;
  throw std::invalid_argument("unknown method: " + s);
}

std::string to_string(Method m) {
  switch (m) {
    case Method::kMcld: return "mcld";
    case Method::kKd: return "kd";
    case Method::kNone: return "none";
  }
  return "?";
}

namespace {

json spec_to_json(const nn::ModelSpec& s) {
  return json{{"architecture_id", to_string(s.family)},
              {"width", s.width},
              {"depth", s.depth},
              {"num_classes", s.num_classes},
              {"in_channels", s.in_channels},
              {"image_h", s.image_h},
              {"image_w", s.image_w}};
}

nn::ModelSpec spec_from_json(const json& j) {
  nn::ModelSpec s;
  s.family = nn::family_from_string(j.value("architecture_id", "plain_conv"));
  s.width = j.value("width", 8);
  s.depth = j.value("depth", 1);
  s.num_classes = j.value("num_classes", 10);
  s.in_channels = j.value("in_channels", 3);
  s.image_h = j.value("image_h", 16);
  s.image_w = j.value("image_w", 16);
  return s;
}

json dataset_to_json(const data::DatasetSpec& d) {
  return json{{"source", to_string(d.source)},
              {"path", d.path},
              {"num_classes", d.num_classes},
              {"channels", d.channels},
              {"image_h", d.image_h},
              {"image_w", d.image_w},
              {"train_per_class", d.train_per_class},
              {"test_per_class", d.test_per_class},
              {"noise_sigma", d.noise_sigma},
              {"signal_amplitude", d.signal_amplitude},
              {"augment",
               {{"crop", d.augment.crop},
                {"flip", d.augment.flip},
                {"normalize", d.augment.normalize}}},
              {"seed", d.seed}};
}

data::DatasetSpec dataset_from_json(const json& j) {
  data::DatasetSpec d;
  d.source = data::source_from_string(j.value("source", "synthetic"));
  d.path = j.value("path", "");
  d.num_classes = j.value("num_classes", 10);
  d.channels = j.value("channels", 3);
  d.image_h = j.value("image_h", 16);
  d.image_w = j.value("image_w", 16);
  d.train_per_class = j.value("train_per_class", 100);
  d.test_per_class = j.value("test_per_class", 20);
  d.noise_sigma = j.value("noise_sigma", 0.25);
  d.signal_amplitude = j.value("signal_amplitude", 0.35);
  if (j.contains("augment")) {
    const json& a = j["augment"];
    d.augment.crop = a.value("crop", false);
    d.augment.flip = a.value("flip", false);
    d.augment.normalize = a.value("normalize", true);
  }
  d.seed = j.value("seed", uint64_t{0});
  return d;
}

json loss_to_json(const LossConfig& l) {
  return json{{"tau", l.tau},
              {"queue_capacity", l.queue_capacity},
              {"mask_mode", to_string(l.mask_mode)},
              {"normalize_logits", l.normalize_logits},
              {"warmup_end_epoch", l.warmup_end_epoch},
              {"include_task_ce", l.include_task_ce},
              {"task_ce_weight", l.task_ce_weight},
              {"kd_tau", l.kd_tau}};
}

LossConfig loss_from_json(const json& j) {
  LossConfig l;
  l.tau = j.value("tau", 0.07);
  l.queue_capacity = j.value("queue_capacity", 8192);
  l.mask_mode = mask_mode_from_string(j.value("mask_mode", "exclude"));
  l.normalize_logits = j.value("normalize_logits", false);
  l.warmup_end_epoch = j.value("warmup_end_epoch", 0);
  l.include_task_ce = j.value("include_task_ce", true);
  l.task_ce_weight = j.value("task_ce_weight", 1.0);
  l.kd_tau = j.value("kd_tau", 4.0);
  return l;
}

}  // namespace

void DistillRunConfig::resolve_defaults() {
  if (loss.warmup_end_epoch <= 0) {
    loss.warmup_end_epoch =
        std::max(1, static_cast<int>(std::lround(155.0 / 240.0 * epochs)));
  }
  if (optimizer.lr_decay_epochs.empty()) {
    for (double frac : {150.0 / 240.0, 180.0 / 240.0, 210.0 / 240.0}) {
      const int e = static_cast<int>(std::lround(frac * epochs));
      if (e > 0 && e < epochs &&
          (optimizer.lr_decay_epochs.empty() ||
           e > optimizer.lr_decay_epochs.back())) {
        optimizer.lr_decay_epochs.push_back(e);
      }
    }
  }
}

void DistillRunConfig::validate() const {
  teacher.validate();
  student.validate();
  dataset.validate();
  loss.validate();
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  for (size_t i = 0; i < optimizer.lr_decay_epochs.size(); ++i) {
    const int e = optimizer.lr_decay_epochs[i];
    if (e >= epochs || (i > 0 && e <= optimizer.lr_decay_epochs[i - 1])) {
      throw std::invalid_argument(
          "lr_decay_epochs must be strictly increasing and < epochs");
    }
  }
}

json DistillRunConfig::to_json() const {
  return json{{"teacher", spec_to_json(teacher)},
              {"teacher_checkpoint", teacher_checkpoint},
              {"student", spec_to_json(student)},
              {"dataset", dataset_to_json(dataset)},
              {"loss", loss_to_json(loss)},
              {"method", to_string(method)},
              {"ablation",
               {{"instance", ablation.instance},
                {"sample", ablation.sample},
                {"category", ablation.category}}},
              {"optimizer",
               {{"lr", optimizer.lr},
                {"momentum", optimizer.momentum},
                {"weight_decay", optimizer.weight_decay},
                {"lr_decay_epochs", optimizer.lr_decay_epochs},
                {"lr_decay_factor", optimizer.lr_decay_factor},
                {"max_grad_norm", optimizer.max_grad_norm}}},
              {"epochs", epochs},
              {"batch_size", batch_size},
              {"seed", seed},
              {"output_dir", output_dir}};
}

DistillRunConfig DistillRunConfig::from_json(const json& j) {
  DistillRunConfig c;
  if (j.contains("teacher")) c.teacher = spec_from_json(j["teacher"]);
  c.teacher_checkpoint = j.value("teacher_checkpoint", "");
  if (j.contains("student")) c.student = spec_from_json(j["student"]);
  if (j.contains("dataset")) c.dataset = dataset_from_json(j["dataset"]);
  if (j.contains("loss")) c.loss = loss_from_json(j["loss"]);
  c.method = method_from_string(j.value("method", "mcld"));
  if (j.contains("ablation")) {
    const json& a = j["ablation"];
    c.ablation.instance = a.value("instance", true);
    c.ablation.sample = a.value("sample", true);
    c.ablation.category = a.value("category", true);
  }
  if (j.contains("optimizer")) {
    const json& o = j["optimizer"];
    c.optimizer.lr = o.value("lr", 0.02);
    c.optimizer.momentum = o.value("momentum", 0.9);
    c.optimizer.weight_decay = o.value("weight_decay", 5e-4);
    c.optimizer.lr_decay_epochs =
        o.value("lr_decay_epochs", std::vector<int>{});
    c.optimizer.lr_decay_factor = o.value("lr_decay_factor", 0.1);
    c.optimizer.max_grad_norm = o.value("max_grad_norm", 5.0);
  }
  c.epochs = j.value("epochs", 12);
  c.batch_size = j.value("batch_size", 64);
  c.seed = j.value("seed", uint64_t{1});
  c.output_dir = j.value("output_dir", "");
  return c;
}

uint64_t DistillRunConfig::fingerprint() const {
  return fnv1a64(to_json().dump());
}

json MetricRecord::to_json() const {
  return json{{"epoch", epoch},
              {"split", split},
              {"loss_total", loss_total},
              {"loss_inst", loss_inst},
              {"loss_samp", loss_samp},
              {"loss_cate", loss_cate},
              {"loss_kd", loss_kd},
              {"loss_ce", loss_ce},
              {"omega", omega},
              {"top1", top1},
              {"top5", top5},
              {"wall_seconds_per_batch", wall_seconds_per_batch}};
}

std::string MetricRecord::csv_header() {
  return "epoch,split,loss_total,loss_inst,loss_samp,loss_cate,loss_kd,"
         "loss_ce,omega,top1,top5,wall_seconds_per_batch";
}

std::string MetricRecord::to_csv() const {
  std::ostringstream out;
  out << epoch << ',' << split << ',' << loss_total << ',' << loss_inst << ','
      << loss_samp << ',' << loss_cate << ',' << loss_kd << ',' << loss_ce
      << ',' << omega << ',' << top1 << ',' << top5 << ','
      << wall_seconds_per_batch;
  return out.str();
}

std::pair<double, double> accuracy_from_logits(const Eigen::MatrixXf& logits,
                                               const std::vector<int>& labels) {
  if (logits.rows() != static_cast<long>(labels.size()) || labels.empty()) {
    throw std::invalid_argument("accuracy: empty or mismatched inputs");
  }
  const int c = static_cast<int>(logits.cols());
  const int k = std::min(5, c);
  long hit1 = 0, hit5 = 0;
  for (long i = 0; i < logits.rows(); ++i) {
    const int y = labels[i];
    const float own = logits(i, y);
    int above = 0;  // classes scoring strictly higher than the true class
    for (int j = 0; j < c; ++j) {
      if (logits(i, j) > own) ++above;
    }
    if (above == 0) ++hit1;
    if (above < k) ++hit5;
  }
  const double n = static_cast<double>(labels.size());
  return {100.0 * hit1 / n, 100.0 * hit5 / n};
}

std::pair<double, double> evaluate(nn::Model& model, const data::Dataset& ds,
                                   int batch_size) {
  if (ds.size() == 0) throw std::invalid_argument("evaluate: empty split");
  data::AugmentFlags eval_aug;  // normalization only
  Eigen::MatrixXf logits(ds.size(), model.spec().num_classes);
  for (int start = 0; start < ds.size(); start += batch_size) {
    const int end = std::min(ds.size(), start + batch_size);
    std::vector<int> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    nn::Tensor4 images = data::make_batch(ds, idx, eval_aug, nullptr);
    logits.middleRows(start, end - start) = model.forward(images).logits;
  }
  return accuracy_from_logits(logits, ds.labels);
}

namespace {

constexpr char kStateMagic[8] = {'M', 'C', 'L', 'D', 'S', 'T', 'A', '1'};

struct TrainState {
  int next_epoch = 0;
  double best_top1 = -1.0;
  double lr = 0.0;
  std::vector<float> params;
  std::vector<std::vector<float>> velocity;
  Eigen::MatrixXd queue_rows;  // fill x C
  std::vector<int> queue_labels;
};

void save_state(const std::string& path, const TrainState& st) {
  std::ofstream out(path, std::ios::binary);
  out.write(kStateMagic, 8);
  auto w = [&out](const void* p, size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  };
  w(&st.next_epoch, sizeof(int));
  w(&st.best_top1, sizeof(double));
  w(&st.lr, sizeof(double));
  uint64_t n = st.params.size();
  w(&n, 8);
  w(st.params.data(), n * sizeof(float));
  n = st.velocity.size();
  w(&n, 8);
  for (const auto& v : st.velocity) {
    uint64_t m = v.size();
    w(&m, 8);
    w(v.data(), m * sizeof(float));
  }
  const uint64_t rows = st.queue_rows.rows(), cols = st.queue_rows.cols();
  w(&rows, 8);
  w(&cols, 8);
  w(st.queue_rows.data(), rows * cols * sizeof(double));
  w(st.queue_labels.data(), rows * sizeof(int));
}

TrainState load_state(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kStateMagic, 8) != 0) {
    throw std::runtime_error("bad training state file: " + path);
  }
  auto r = [&in, &path](void* p, size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in) throw std::runtime_error("truncated state file: " + path);
  };
  TrainState st;
  r(&st.next_epoch, sizeof(int));
  r(&st.best_top1, sizeof(double));
  r(&st.lr, sizeof(double));
  uint64_t n;
  r(&n, 8);
  st.params.resize(n);
  r(st.params.data(), n * sizeof(float));
  r(&n, 8);
  st.velocity.resize(n);
  for (auto& v : st.velocity) {
    uint64_t m;
    r(&m, 8);
    v.resize(m);
    r(v.data(), m * sizeof(float));
  }
  uint64_t rows, cols;
  r(&rows, 8);
  r(&cols, 8);
  st.queue_rows.resize(rows, cols);
  r(st.queue_rows.data(), rows * cols * sizeof(double));
  st.queue_labels.resize(rows);
  r(st.queue_labels.data(), rows * sizeof(int));
  return st;
}

Eigen::MatrixXd to_double(const Eigen::MatrixXf& m) {
  return m.cast<double>();
}

RunResult run_training(const DistillRunConfig& config, bool is_teacher,
                       bool resume) {
  DistillRunConfig cfg = config;
  cfg.resolve_defaults();
  cfg.validate();
  if (cfg.output_dir.empty()) {
    throw std::invalid_argument("output_dir must be set");
  }
  fs::create_directories(cfg.output_dir);
  const fs::path out_dir(cfg.output_dir);

  const nn::ModelSpec& spec = is_teacher ? cfg.teacher : cfg.student;
  const Method method = is_teacher ? Method::kNone : cfg.method;
  if (is_teacher && cfg.method != Method::kNone) {
    throw std::invalid_argument("train_teacher requires method=none");
  }
  if (spec.num_classes != cfg.dataset.num_classes) {
    throw std::invalid_argument("model/dataset class count mismatch");
  }

  // Effective config beside the outputs, for provenance.
  {
    std::ofstream f(out_dir / "effective_config.json");
    f << cfg.to_json().dump(2) << "\n";
  }

  const data::Dataset train_ds = data::load_split(cfg.dataset, "train");
  const data::Dataset test_ds = data::load_split(cfg.dataset, "test");
  const int num_classes = cfg.dataset.num_classes;

  nn::Model model(spec, cfg.seed);

  std::optional<nn::Model> teacher;
  Eigen::MatrixXf teacher_cache;  // all-train logits when inputs are static
  bool teacher_cached = false;
  if (!is_teacher && method != Method::kNone) {
    if (cfg.teacher_checkpoint.empty()) {
      throw std::invalid_argument("distillation requires a teacher checkpoint");
    }
    io::Checkpoint ckpt = io::load_checkpoint(cfg.teacher_checkpoint);
    if (ckpt.spec.num_classes != num_classes ||
        ckpt.spec.image_h != spec.image_h || ckpt.spec.image_w != spec.image_w) {
      throw std::invalid_argument("teacher checkpoint incompatible with run");
    }
    teacher.emplace(io::model_from_checkpoint(ckpt));
    teacher->set_frozen(true);

    if (!cfg.dataset.augment.crop && !cfg.dataset.augment.flip) {
      // Static inputs: teacher logits per train sample never change.
      teacher_cache.resize(train_ds.size(), num_classes);
      data::AugmentFlags eval_aug;
      for (int start = 0; start < train_ds.size(); start += 256) {
        const int end = std::min(train_ds.size(), start + 256);
        std::vector<int> idx(end - start);
        std::iota(idx.begin(), idx.end(), start);
        nn::Tensor4 images = data::make_batch(train_ds, idx, eval_aug, nullptr);
        teacher_cache.middleRows(start, end - start) =
            teacher->forward(images).logits;
      }
      teacher_cached = true;
    }
  }

  ProductQueue queue(cfg.loss.queue_capacity, num_classes);
  TargetMaskQueue mask_queue(cfg.loss.queue_capacity);

  nn::SgdOptimizer opt(cfg.optimizer.lr, cfg.optimizer.momentum,
                       cfg.optimizer.weight_decay);

  int start_epoch = 0;
  double best_top1 = -1.0;
  const std::string state_path = (out_dir / "last_state.bin").string();
  const std::string ckpt_path =
      (out_dir / (is_teacher ? "teacher.ckpt" : "student.ckpt")).string();

  if (resume && fs::exists(state_path)) {
    TrainState st = load_state(state_path);
    start_epoch = st.next_epoch;
    best_top1 = st.best_top1;
    model.load_params(st.params);
    opt.set_lr(st.lr);
    opt.set_velocity(st.velocity);
    for (long i = 0; i < st.queue_rows.rows(); ++i) {
      queue.push_row(st.queue_rows.row(i));
      mask_queue.push_label(st.queue_labels[i]);
    }
  } else {
    std::ofstream jf(out_dir / "metrics.jsonl", std::ios::trunc);
    std::ofstream cf(out_dir / "metrics.csv", std::ios::trunc);
    cf << MetricRecord::csv_header() << "\n";
  }

  const uint64_t fingerprint = cfg.fingerprint();
  RunResult result;
  result.checkpoint_path = ckpt_path;

  std::vector<int> train_labels = train_ds.labels;

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    if (std::find(cfg.optimizer.lr_decay_epochs.begin(),
                  cfg.optimizer.lr_decay_epochs.end(),
                  epoch) != cfg.optimizer.lr_decay_epochs.end()) {
      opt.set_lr(opt.lr() * cfg.optimizer.lr_decay_factor);
    }

    const auto batches =
        data::epoch_batches(train_ds.size(), cfg.batch_size, cfg.seed, epoch);
    std::mt19937_64 aug_rng(cfg.seed * 0x853C49E6748FEA9Bull + epoch);

    MetricRecord train_rec;
    train_rec.epoch = epoch;
    train_rec.split = "train";
    train_rec.omega = warmup_weight(epoch, cfg.loss);
    double seconds = 0.0;

    for (const std::vector<int>& idx : batches) {
      const auto t0 = std::chrono::steady_clock::now();
      nn::Tensor4 images =
          data::make_batch(train_ds, idx, cfg.dataset.augment, &aug_rng);

      nn::ForwardResult sres = model.forward(images, true);

      LogitBatch student_batch;
      student_batch.values = to_double(sres.logits);
      student_batch.labels.resize(static_cast<int>(idx.size()));
      for (size_t i = 0; i < idx.size(); ++i) {
        student_batch.labels[static_cast<int>(i)] = train_labels[idx[i]];
      }

      LogitBatch teacher_batch;
      if (teacher) {
        teacher_batch.labels = student_batch.labels;
        if (teacher_cached) {
          teacher_batch.values.resize(static_cast<int>(idx.size()), num_classes);
          for (size_t i = 0; i < idx.size(); ++i) {
            teacher_batch.values.row(static_cast<int>(i)) =
                to_double(teacher_cache.row(idx[i]).eval());
          }
        } else {
          teacher_batch.values = to_double(teacher->forward(images).logits);
        }
      }

      Eigen::MatrixXd grad =
          Eigen::MatrixXd::Zero(student_batch.values.rows(), num_classes);
      double loss_total = 0.0;

      if (method == Method::kMcld) {
        Eigen::MatrixXd g;
        McldComponents comp =
            mcld_loss_grad(student_batch, teacher_batch, queue, mask_queue,
                           epoch, cfg.loss, cfg.ablation, &g);
        grad += g;
        loss_total += comp.total;
        train_rec.loss_inst += comp.instance;
        train_rec.loss_samp += comp.sample;
        train_rec.loss_cate += comp.category;
      } else if (method == Method::kKd) {
        Eigen::MatrixXd g;
        const double kd = kd_loss_grad(student_batch, teacher_batch,
                                       cfg.loss.kd_tau, &g);
        grad += g;
        loss_total += kd;
        train_rec.loss_kd += kd;
      }

      if (cfg.loss.include_task_ce || method == Method::kNone) {
        Eigen::MatrixXd g;
        const double ce = task_ce_loss_grad(student_batch, &g);
        const double wt =
            method == Method::kNone ? 1.0 : cfg.loss.task_ce_weight;
        grad += wt * g;
        loss_total += wt * ce;
        train_rec.loss_ce += ce;
      }

      if (!std::isfinite(loss_total)) {
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch));
      }
      train_rec.loss_total += loss_total;

      model.zero_grads();
      model.backward_from_logits(grad.cast<float>());
      auto params = model.params();
      if (cfg.optimizer.max_grad_norm > 0) {
        double sq = 0;
        for (const auto& p : params) {
          for (long i = 0; i < p.size; ++i) {
            sq += static_cast<double>(p.grad[i]) * p.grad[i];
          }
        }
        const double norm = std::sqrt(sq);
        if (norm > cfg.optimizer.max_grad_norm) {
          const float scale =
              static_cast<float>(cfg.optimizer.max_grad_norm / norm);
          for (auto& p : params) {
            for (long i = 0; i < p.size; ++i) p.grad[i] *= scale;
          }
        }
      }
      opt.step(params);

      // A sample never serves as its own negative: the queue advances after
      // the loss step.
      if (method == Method::kMcld) {
        enqueue(queue, mask_queue, teacher_batch);
      }
      seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                               t0)
                     .count();
    }

    const double nb = static_cast<double>(batches.size());
    train_rec.loss_total /= nb;
    train_rec.loss_inst /= nb;
    train_rec.loss_samp /= nb;
    train_rec.loss_cate /= nb;
    train_rec.loss_kd /= nb;
    train_rec.loss_ce /= nb;
    train_rec.wall_seconds_per_batch = seconds / nb;

    MetricRecord test_rec;
    test_rec.epoch = epoch;
    test_rec.split = "test";
    std::tie(test_rec.top1, test_rec.top5) = evaluate(model, test_ds);

    result.history.push_back(train_rec);
    result.history.push_back(test_rec);
    result.final_top1 = test_rec.top1;

    {
      std::ofstream jf(out_dir / "metrics.jsonl", std::ios::app);
      jf << train_rec.to_json().dump() << "\n"
         << test_rec.to_json().dump() << "\n";
      std::ofstream cf(out_dir / "metrics.csv", std::ios::app);
      cf << train_rec.to_csv() << "\n" << test_rec.to_csv() << "\n";
    }

    if (test_rec.top1 > best_top1) {
      best_top1 = test_rec.top1;
      io::save_checkpoint(ckpt_path, model, fingerprint);
    }

    TrainState st;
    st.next_epoch = epoch + 1;
    st.best_top1 = best_top1;
    st.lr = opt.lr();
    st.params = model.serialize_params();
    st.velocity = opt.velocity();
    st.queue_rows = queue.filled();
    const Eigen::VectorXi qlabels = mask_queue.filled();
    st.queue_labels.assign(qlabels.data(), qlabels.data() + qlabels.size());
    save_state(state_path, st);
  }

  result.best_top1 = best_top1;
  return result;
}

}  // namespace

RunResult train_teacher(const DistillRunConfig& config) {
  return run_training(config, /*is_teacher=*/true, /*resume=*/false);
}

RunResult distill(const DistillRunConfig& config, bool resume) {
  return run_training(config, /*is_teacher=*/false, resume);
}

}  // namespace mcld::train
