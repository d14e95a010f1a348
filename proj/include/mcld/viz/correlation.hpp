#pragma once

#include <string>

#include <Eigen/Dense>

namespace mcld::viz {

// Absolute elementwise difference between the student's and teacher's C x C
// class-correlation matrices (Pearson over samples, per logit column).
// Cells involving a constant column in either model are NaN (masked).
Eigen::MatrixXd correlation_diff_matrix(const Eigen::MatrixXd& student_logits,
                                        const Eigen::MatrixXd& teacher_logits);

// Writes `<prefix>.csv` (sidecar with color-scale bounds) and `<prefix>.ppm`
// (heatmap rendered from the sidecar alone; lighter = smaller difference).
void write_correlation_diff(const Eigen::MatrixXd& diff,
                            const std::string& out_prefix);

// Re-renders the heatmap from an existing sidecar. Deterministic: the same
// sidecar always produces the same bytes.
void render_correlation_heatmap(const std::string& csv_path,
                                const std::string& ppm_path);

}  // namespace mcld::viz
