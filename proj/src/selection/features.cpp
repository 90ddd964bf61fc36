#include "mdpt/selection/features.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "mdpt/util.hpp"

namespace mdpt::selection {

double grad_squared_norm(const numcore::GradientMap& grads) {
  double s = 0.0;
  for (const auto& [name, g] : grads)
    for (double v : g.values()) s += v * v;
  return s;
}

double gradient_feature(const model::Transformer& model, const data::Segment& segment,
                        const data::MaskingConfig& masking, uint64_t mask_seed) {
  data::MaskedBatch batch = data::mask_batch({segment}, masking, mask_seed);
  numcore::Tape tape;
  auto out = model.mlm_forward(tape, batch);
  return grad_squared_norm(tape.backprop(out.loss));
}

std::vector<double> gradient_features(const model::Transformer& model,
                                      const std::vector<data::Segment>& segments,
                                      const data::MaskingConfig& masking, uint64_t seed) {
  std::vector<double> out;
  out.reserve(segments.size());
  for (size_t i = 0; i < segments.size(); ++i)
    out.push_back(gradient_feature(model, segments[i], masking, derive_seed(seed, i)));
  return out;
}

FeatureStats feature_stats(const std::vector<double>& features) {
  if (features.empty()) throw std::invalid_argument("feature_stats: empty feature list");
  FeatureStats s;
  s.min = s.max = features[0];
  double sum = 0.0;
  for (double v : features) {
    sum += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  s.mean = sum / static_cast<double>(features.size());
  double var = 0.0;
  for (double v : features) var += (v - s.mean) * (v - s.mean);
  s.std_dev = std::sqrt(var / static_cast<double>(features.size()));
  return s;
}

void write_features_csv(const std::string& path, const std::vector<double>& features) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write feature file: " + path);
  out << "segment_id,scalar_feature\n";
  out.precision(17);
  for (size_t i = 0; i < features.size(); ++i) out << i << "," << features[i] << "\n";
}

}  // namespace mdpt::selection
