#pragma once

#include <cstdint>
#include <string>

#include "mdpt/model/config.hpp"
#include "mdpt/numcore/tensor.hpp"

namespace mdpt::model {

struct CheckpointMeta {
  std::string id;         // assigned by the producer (stage name + config hash)
  std::string stage;
  uint64_t step_count = 0;
  uint64_t seed = 0;
  std::string parent_id;  // empty for freshly initialized models

  bool operator==(const CheckpointMeta&) const = default;
};

// Immutable model snapshot; EWC's frozen anchor is a Checkpoint.
struct Checkpoint {
  ModelConfig config;
  numcore::ParameterSet params;
  CheckpointMeta meta;

  bool operator==(const Checkpoint& o) const;
};

// Self-describing container: magic + version tag, JSON header with the config
// and a tensor index, little-endian float64 blobs keyed by name. Round-trips
// bit-exactly.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Stable content hash over parameter names, shapes and raw value bytes.
// Used to verify frozen-encoder guarantees.
uint64_t params_hash(const numcore::ParameterSet& params);

}  // namespace mdpt::model
