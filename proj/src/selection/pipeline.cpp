#include "mdpt/selection/pipeline.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "mdpt/selection/gmm.hpp"
#include "mdpt/selection/pca.hpp"
#include "mdpt/selection/strategies.hpp"
#include "mdpt/util.hpp"

namespace mdpt::selection {

SelectionResult select_segments(const model::Transformer& model,
                                const std::vector<data::Segment>& segments, size_t n,
                                const SelectionParams& params, uint64_t seed) {
  if (segments.empty()) throw std::invalid_argument("select_segments: no segments");
  if (n > segments.size())
    throw std::invalid_argument("select_segments: n exceeds segment count");

  SelectionResult result;
  result.strategy = params.strategy;
  result.population = segments.size();

  if (params.strategy == "latent") {
    std::vector<std::vector<double>> emb;
    emb.reserve(segments.size());
    for (const auto& s : segments) emb.push_back(model.encode(s, params.pooling));
    if (params.normalize_embeddings) {
      for (auto& e : emb) {
        double norm = 0.0;
        for (double v : e) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > 0.0)
          for (double& v : e) v /= norm;
      }
    }
    const size_t d = std::min({params.pca_dim, emb.size(), emb[0].size()});
    PcaModel pca = pca_fit(emb, d);
    auto reduced = pca_transform(pca, emb);
    const size_t k = std::min(params.gmm_k, reduced.size());
    GmmModel gmm = gmm_fit(reduced, k, params.gmm_max_iters, params.gmm_tol,
                           derive_seed(seed, 1));
    auto labels = gmm_assign(gmm, reduced);
    result.indices = cluster_uniform_sample(labels, n, derive_seed(seed, 2));
    return result;
  }

  if (params.strategy == "random") {
    std::vector<double> dummy(segments.size(), 0.0);
    result.indices = select_by_strategy(dummy, n, Strategy::kRandom, 1, seed);
    return result;
  }

  std::string grad_kind;
  if (params.strategy.rfind("grad_", 0) == 0) grad_kind = params.strategy.substr(5);
  Strategy strat = parse_strategy(grad_kind.empty() ? params.strategy : grad_kind);
  auto features = gradient_features(model, segments, params.masking, derive_seed(seed, 0));
  result.stats = feature_stats(features);
  result.indices = select_by_strategy(features, n, strat, params.num_bins, seed);
  return result;
}

void write_selection_manifest(const std::string& path, const SelectionResult& result,
                              const SelectionParams& params, uint64_t seed,
                              const std::string& checkpoint_id) {
  nlohmann::json j;
  j["strategy"] = result.strategy;
  j["seed"] = seed;
  j["checkpoint_id"] = checkpoint_id;
  j["population"] = result.population;
  j["chosen"] = result.indices;
  j["params"] = {{"num_bins", params.num_bins},
                 {"pooling", params.pooling == model::Pooling::kCls ? "cls" : "avg"},
                 {"pca_dim", params.pca_dim},
                 {"gmm_k", params.gmm_k},
                 {"normalize_embeddings", params.normalize_embeddings},
                 {"mask_rate", params.masking.rate}};
  if (result.stats) {
    j["feature_stats"] = {{"mean", result.stats->mean},
                          {"std", result.stats->std_dev},
                          {"min", result.stats->min},
                          {"max", result.stats->max}};
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write selection manifest: " + path);
  out << j.dump(2) << "\n";
}

std::vector<size_t> load_selection_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read selection manifest: " + path);
  nlohmann::json j;
  in >> j;
  return j.at("chosen").get<std::vector<size_t>>();
}

}  // namespace mdpt::selection
