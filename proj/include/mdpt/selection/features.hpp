#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdpt/data/masking.hpp"
#include "mdpt/model/transformer.hpp"
#include "mdpt/numcore/tensor.hpp"

namespace mdpt::selection {

// Squared L2 norm of the full gradient, the scalar selection feature.
double grad_squared_norm(const numcore::GradientMap& grads);

// One MLM forward/backward on a single segment with a fixed masking seed.
double gradient_feature(const model::Transformer& model, const data::Segment& segment,
                        const data::MaskingConfig& masking, uint64_t mask_seed);

// Features for a whole segment list in canonical order, one derived mask seed
// per segment.
std::vector<double> gradient_features(const model::Transformer& model,
                                      const std::vector<data::Segment>& segments,
                                      const data::MaskingConfig& masking, uint64_t seed);

struct FeatureStats {
  double mean = 0.0;
  double std_dev = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
};

FeatureStats feature_stats(const std::vector<double>& features);

void write_features_csv(const std::string& path, const std::vector<double>& features);

}  // namespace mdpt::selection
