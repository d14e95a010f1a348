#pragma once

#include <string>

namespace mcld {

// How queue entries whose label matches the anchor are handled in the
// instance-wise denominator.
//   kExclude: masked terms are dropped from the sum entirely.
//   kLiteralMultiply: the mask multiplies the similarity inside the
//     exponent, so a masked term contributes exp(0) = 1.
enum class MaskMode { kExclude, kLiteralMultiply };

MaskMode mask_mode_from_string(const std::string& s);
std::string to_string(MaskMode m);

struct LossConfig {
  double tau = 0.07;            // contrastive temperature
  int queue_capacity = 8192;    // K
  MaskMode mask_mode = MaskMode::kExclude;
  bool normalize_logits = false;
  int warmup_end_epoch = 1;     // epoch at which omega reaches 1
  bool include_task_ce = true;
  double task_ce_weight = 1.0;
  double kd_tau = 4.0;          // temperature for the classic-KD baseline

  void validate() const;
};

}  // namespace mcld
