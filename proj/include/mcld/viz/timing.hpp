#pragma once

#include <string>
#include <vector>

namespace mcld::viz {

struct TimingPoint {
  std::string name;
  double seconds_per_batch = 0;  // mean over train epochs
  double top1 = 0;               // final test accuracy
};

// Reads a run's metrics.jsonl and reduces it to one point.
TimingPoint timing_point_from_metrics(const std::string& metrics_jsonl,
                                      const std::string& name);

// Writes `<prefix>.csv` (name,seconds_per_batch,top1) and `<prefix>.ppm`
// (accuracy vs. time scatter rendered from the sidecar alone).
void timing_plot(const std::vector<TimingPoint>& points,
                 const std::string& out_prefix);

void render_timing_scatter(const std::string& csv_path,
                           const std::string& ppm_path);

}  // namespace mcld::viz
