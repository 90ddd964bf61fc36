#pragma once

#include <map>
#include <string>
#include <vector>

#include "mdpt/model/checkpoint.hpp"

namespace mdpt::analysis {

struct LayerSimilarityProfile {
  std::string a_id;
  std::string b_id;
  std::vector<double> cosine;  // per layer group, 0 .. L+1
};

// Cosine similarity per layer group between the concatenated flattened
// parameters of two checkpoints with identical configs.
LayerSimilarityProfile layerwise_cosine(const model::Checkpoint& a, const model::Checkpoint& b);

// Per-parameter cosines, emitted alongside the group profile for inspection.
std::map<std::string, double> per_parameter_cosine(const model::Checkpoint& a,
                                                   const model::Checkpoint& b);

// CSV: group,cosine
void write_profile_csv(const std::string& path, const LayerSimilarityProfile& profile);

}  // namespace mdpt::analysis
