#pragma once

#include <cstdint>

#include "mcld/data/dataset.hpp"
#include "mcld/io/feature_table.hpp"
#include "mcld/nn/model.hpp"

namespace mcld::transfer {

// Penultimate features of every sample in the split, model untouched.
io::FeatureTable extract_features(nn::Model& model, const data::Dataset& ds,
                                  int batch_size = 128);

struct ProbeConfig {
  int epochs = 200;
  int batch_size = 64;
  double lr = 0.5;
  double lr_decay = 0.1;       // applied at 60% and 85% of epochs
  int plateau_patience = 25;   // stop after this many epochs w/o improvement
};

// Trains a single linear softmax classifier on frozen features; returns
// test top-1. Classes absent from the train split only warn.
double linear_probe(const io::FeatureTable& train, const io::FeatureTable& test,
                    int num_classes, uint64_t seed, ProbeConfig cfg = {});

}  // namespace mcld::transfer
