#pragma once

#include <string>
#include <vector>

#include "mdpt/data/masking.hpp"
#include "mdpt/model/transformer.hpp"
#include "mdpt/numcore/tensor.hpp"

namespace mdpt::mitigation {

// Diagonal Fisher estimate anchored at a frozen checkpoint:
// F_i = (1/N) * sum_j (dL_j/dtheta_i)^2 over N single-segment samples.
struct FisherDiagonal {
  numcore::GradientMap values;  // nonnegative, shapes match anchor parameters
  std::string anchor_id;
  size_t sample_count = 0;

  void validate_against(const numcore::ParameterSet& params) const;
};

// Accumulation core: mean of elementwise-squared per-sample gradients.
FisherDiagonal fisher_from_grads(const std::vector<numcore::GradientMap>& per_sample,
                                 const std::string& anchor_id);

// One gradient evaluation per sample (batch of 1), squared and averaged.
// Samples must carry batch == 1 so gradients are true per-sample values.
FisherDiagonal fisher_diagonal(const model::Transformer& model,
                               const std::vector<data::MaskedBatch>& samples,
                               const std::string& anchor_id);

// Same container format as checkpoints, role-tagged "fisher".
void save_fisher(const FisherDiagonal& fisher, const std::string& path);
FisherDiagonal load_fisher(const std::string& path);

}  // namespace mdpt::mitigation
