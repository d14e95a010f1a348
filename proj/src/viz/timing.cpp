#include "mcld/viz/timing.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mcld/viz/render.hpp"

namespace mcld::viz {

TimingPoint timing_point_from_metrics(const std::string& metrics_jsonl,
                                      const std::string& name) {
  std::ifstream f(metrics_jsonl);
  if (!f) throw std::runtime_error("cannot read " + metrics_jsonl);
  TimingPoint pt;
  pt.name = name;
  double time_sum = 0.0;
  int time_count = 0;
  bool saw_test = false;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const std::string split = j.at("split").get<std::string>();
    if (split == "train") {
      time_sum += j.at("wall_seconds_per_batch").get<double>();
      ++time_count;
    } else if (split == "test") {
      pt.top1 = j.at("top1").get<double>();
      saw_test = true;
    }
  }
  if (time_count == 0 || !saw_test) {
    throw std::runtime_error("incomplete metrics file: " + metrics_jsonl);
  }
  pt.seconds_per_batch = time_sum / time_count;
  return pt;
}

void timing_plot(const std::vector<TimingPoint>& points,
                 const std::string& out_prefix) {
  if (points.empty()) throw std::invalid_argument("timing_plot: no points");
  std::ofstream f(out_prefix + ".csv");
  if (!f) throw std::runtime_error("cannot write " + out_prefix + ".csv");
  f.precision(17);
  f << "name,seconds_per_batch,top1\n";
  for (const auto& p : points) {
    f << p.name << ',' << p.seconds_per_batch << ',' << p.top1 << "\n";
  }
  f.close();
  render_timing_scatter(out_prefix + ".csv", out_prefix + ".ppm");
}

void render_timing_scatter(const std::string& csv_path,
                           const std::string& ppm_path) {
  std::ifstream f(csv_path);
  if (!f) throw std::runtime_error("cannot read " + csv_path);
  std::string line;
  std::getline(f, line);  // header
  std::vector<TimingPoint> pts;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    TimingPoint p;
    std::string cell;
    std::getline(ss, p.name, ',');
    std::getline(ss, cell, ',');
    p.seconds_per_batch = std::stod(cell);
    std::getline(ss, cell, ',');
    p.top1 = std::stod(cell);
    pts.push_back(std::move(p));
  }
  if (pts.empty()) throw std::runtime_error("empty sidecar: " + csv_path);

  double tmin = pts[0].seconds_per_batch, tmax = tmin;
  double amin = pts[0].top1, amax = amin;
  for (const auto& p : pts) {
    tmin = std::min(tmin, p.seconds_per_batch);
    tmax = std::max(tmax, p.seconds_per_batch);
    amin = std::min(amin, p.top1);
    amax = std::max(amax, p.top1);
  }
  const double tspan = std::max(tmax - tmin, 1e-9);
  const double aspan = std::max(amax - amin, 1e-9);

  constexpr int kSize = 420, kMargin = 24;
  Canvas canvas(kSize, kSize, Color{255, 255, 255});
  for (size_t i = 0; i < pts.size(); ++i) {
    const int px = kMargin +
                   static_cast<int>((pts[i].seconds_per_batch - tmin) / tspan *
                                    (kSize - 2 * kMargin));
    // accuracy grows upward
    const int py = kSize - kMargin -
                   static_cast<int>((pts[i].top1 - amin) / aspan *
                                    (kSize - 2 * kMargin));
    canvas.disc(px, py, 4, class_color(static_cast<int>(i)));
  }
  canvas.frame(Color{0, 0, 0});
  canvas.save_ppm(ppm_path);
}

}  // namespace mcld::viz
