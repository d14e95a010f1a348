#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcld/nn/model.hpp"

namespace mcld::io {

// On-disk model snapshot: format-version header, the fingerprint of the
// config that produced it, the model spec, and the flat parameter blob.
struct Checkpoint {
  uint32_t format_version = 1;
  uint64_t config_fingerprint = 0;
  nn::ModelSpec spec;
  std::vector<float> params;
};

void save_checkpoint(const std::string& path, const nn::Model& model,
                     uint64_t config_fingerprint);

Checkpoint load_checkpoint(const std::string& path);

// Rebuilds the model and loads the stored parameters.
nn::Model model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace mcld::io
