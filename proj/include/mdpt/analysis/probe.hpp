#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdpt/model/checkpoint.hpp"

namespace mdpt::analysis {

// Token-tagging probe data: tags align with tokens (the <s> position carries
// tag 0 and is skipped during training/eval).
struct ProbeDataset {
  std::vector<std::vector<int32_t>> train_tokens;
  std::vector<std::vector<uint8_t>> train_tags;
  std::vector<std::vector<int32_t>> test_tokens;
  std::vector<std::vector<uint8_t>> test_tags;

  void validate() const;
};

struct ProbeConfig {
  size_t epochs = 20;
  double lr = 1e-2;
};

struct ProbeResult {
  size_t layer = 0;
  std::string task;
  double metric = 0.0;  // micro-F1 of the positive class, in [0,1]
  ProbeConfig config;
};

// Trains a bias-included linear per-token classifier on frozen layer-l hidden
// states and reports the test micro-F1. The encoder is never updated.
ProbeResult probe_layer(const model::Checkpoint& ckpt, size_t layer,
                        const ProbeDataset& dataset, const std::string& task_name,
                        uint64_t seed, const ProbeConfig& cfg = {});

ProbeDataset load_probe_dataset(const std::string& path);
void save_probe_dataset(const ProbeDataset& dataset, const std::string& path);

}  // namespace mdpt::analysis
