#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mdpt/data/masking.hpp"
#include "mdpt/model/transformer.hpp"
#include "mdpt/selection/features.hpp"

namespace mdpt::selection {

// Pipeline ids: "random", "grad_low", "grad_high", "grad_uniform" run the
// squared-gradient scalar feature; "latent" runs embedding -> PCA -> GMM ->
// cluster-uniform sampling.
struct SelectionParams {
  std::string strategy = "random";
  size_t num_bins = 10;
  model::Pooling pooling = model::Pooling::kAvg;
  size_t pca_dim = 16;
  size_t gmm_k = 5;
  size_t gmm_max_iters = 100;
  double gmm_tol = 1e-6;
  bool normalize_embeddings = false;
  data::MaskingConfig masking;
};

struct SelectionResult {
  std::vector<size_t> indices;
  std::string strategy;
  std::optional<FeatureStats> stats;  // present for gradient-feature pipelines
  size_t population = 0;
};

SelectionResult select_segments(const model::Transformer& model,
                                const std::vector<data::Segment>& segments, size_t n,
                                const SelectionParams& params, uint64_t seed);

void write_selection_manifest(const std::string& path, const SelectionResult& result,
                              const SelectionParams& params, uint64_t seed,
                              const std::string& checkpoint_id);

std::vector<size_t> load_selection_manifest(const std::string& path);

}  // namespace mdpt::selection
