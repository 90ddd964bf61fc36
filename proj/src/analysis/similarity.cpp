#include "mdpt/analysis/similarity.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "mdpt/model/transformer.hpp"

namespace mdpt::analysis {

namespace {

struct DotAcc {
  double dot = 0.0, na = 0.0, nb = 0.0;
  void add(const numcore::Tensor& a, const numcore::Tensor& b) {
    for (size_t i = 0; i < a.size(); ++i) {
      dot += a[i] * b[i];
      na += a[i] * a[i];
      nb += b[i] * b[i];
    }
  }
  double cosine(const std::string& what) const {
    const double denom = std::sqrt(na) * std::sqrt(nb);
    if (denom == 0.0)
      throw std::invalid_argument("layerwise_cosine: zero-norm vector for " + what);
    return dot / denom;
  }
};

void check_compatible(const model::Checkpoint& a, const model::Checkpoint& b) {
  if (!(a.config == b.config))
    throw std::invalid_argument("layerwise_cosine: checkpoint configs differ");
}

}  // namespace

LayerSimilarityProfile layerwise_cosine(const model::Checkpoint& a, const model::Checkpoint& b) {
  check_compatible(a, b);
  const size_t groups = a.config.num_groups();
  std::vector<DotAcc> acc(groups);
  for (const auto& [name, ta] : a.params) {
    const auto& tb = b.params.at(name);
    const int g = model::Transformer::group_of_name(name, a.config.num_layers);
    acc[static_cast<size_t>(g)].add(ta, tb);
  }
  LayerSimilarityProfile profile;
  profile.a_id = a.meta.id;
  profile.b_id = b.meta.id;
  profile.cosine.reserve(groups);
  for (size_t g = 0; g < groups; ++g)
    profile.cosine.push_back(acc[g].cosine("group " + std::to_string(g)));
  return profile;
}

std::map<std::string, double> per_parameter_cosine(const model::Checkpoint& a,
                                                   const model::Checkpoint& b) {
  check_compatible(a, b);
  std::map<std::string, double> out;
  for (const auto& [name, ta] : a.params) {
    DotAcc acc;
    acc.add(ta, b.params.at(name));
    const double denom = std::sqrt(acc.na) * std::sqrt(acc.nb);
    out[name] = denom == 0.0 ? 0.0 : acc.dot / denom;
  }
  return out;
}

void write_profile_csv(const std::string& path, const LayerSimilarityProfile& profile) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write profile: " + path);
  out << "group,cosine\n";
  out.precision(17);
  for (size_t g = 0; g < profile.cosine.size(); ++g) out << g << "," << profile.cosine[g] << "\n";
}

}  // namespace mdpt::analysis
