#include "mdpt/harness/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <stdexcept>

#include "mdpt/mitigation/trainer.hpp"
#include "mdpt/model/transformer.hpp"
#include "mdpt/util.hpp"

namespace mdpt::harness {

using nlohmann::json;

void ExperimentConfig::validate() const {
  model.validate();
  if (corpus_dir.empty()) throw std::invalid_argument("config: corpus_dir is required");
  if (outdir.empty()) throw std::invalid_argument("config: outdir is required");
  if (domains.size() < 2)
    throw std::invalid_argument("config: need at least 2 domains for a continual experiment");
  if (segment_length < 2 || segment_length + 1 > model.max_seq_len)
    throw std::invalid_argument("config: segment_length must fit max_seq_len with <s>");
  if (!(mask_rate > 0.0 && mask_rate < 1.0))
    throw std::invalid_argument("config: mask_rate must be in (0,1)");
  if (batch_size == 0 || base_steps == 0 || stage_steps == 0)
    throw std::invalid_argument("config: steps and batch size must be positive");
  if (modes.empty()) throw std::invalid_argument("config: modes grid is empty");
  for (const auto& m : modes)
    if (m != "ewc_nofisher") mitigation::parse_mode(m);
  if (lambdas.empty() || rhos.empty() || fisher_fractions.empty() || replay_ratios.empty() ||
      strategies.empty() || pca_dims.empty() || gmm_ks.empty())
    throw std::invalid_argument("config: hyperparameter grids must be nonempty");
  if (seeds.empty()) throw std::invalid_argument("config: seeds list is empty");
  std::set<uint64_t> uniq(seeds.begin(), seeds.end());
  if (uniq.size() != seeds.size())
    throw std::invalid_argument("config: seeds must be distinct");
  model::parse_pooling(pooling);
  for (size_t l : probe_layers)
    if (l > model.num_layers)
      throw std::invalid_argument("config: probe layer out of range");
}

namespace {

json to_json(const ExperimentConfig& c) {
  return json{
      {"model",
       {{"vocab_size", c.model.vocab_size},
        {"num_layers", c.model.num_layers},
        {"hidden_dim", c.model.hidden_dim},
        {"num_heads", c.model.num_heads},
        {"max_seq_len", c.model.max_seq_len},
        {"ff_dim", c.model.ff_dim}}},
      {"segment_length", c.segment_length},
      {"mask_rate", c.mask_rate},
      {"base_steps", c.base_steps},
      {"stage_steps", c.stage_steps},
      {"batch_size", c.batch_size},
      {"lr", c.lr},
      {"domains", c.domains},
      {"corpus_dir", c.corpus_dir},
      {"modes", c.modes},
      {"lambdas", c.lambdas},
      {"rhos", c.rhos},
      {"fisher_fractions", c.fisher_fractions},
      {"replay_ratios", c.replay_ratios},
      {"strategies", c.strategies},
      {"pooling", c.pooling},
      {"pca_dims", c.pca_dims},
      {"gmm_ks", c.gmm_ks},
      {"num_bins", c.num_bins},
      {"replay_capacity", c.replay_capacity},
      {"fisher_min_samples", c.fisher_min_samples},
      {"eval_batches", c.eval_batches},
      {"probe_enabled", c.probe_enabled},
      {"probe_layers", c.probe_layers},
      {"seeds", c.seeds},
      {"outdir", c.outdir}};
}

template <typename T>
void opt(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot read " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("config: bad JSON in " + path + ": " + e.what());
  }
  ExperimentConfig c;
  if (j.contains("model")) {
    const json& m = j.at("model");
    opt(m, "vocab_size", c.model.vocab_size);
    opt(m, "num_layers", c.model.num_layers);
    opt(m, "hidden_dim", c.model.hidden_dim);
    opt(m, "num_heads", c.model.num_heads);
    opt(m, "max_seq_len", c.model.max_seq_len);
    opt(m, "ff_dim", c.model.ff_dim);
  }
  opt(j, "segment_length", c.segment_length);
  opt(j, "mask_rate", c.mask_rate);
  opt(j, "base_steps", c.base_steps);
  opt(j, "stage_steps", c.stage_steps);
  opt(j, "batch_size", c.batch_size);
  opt(j, "lr", c.lr);
  opt(j, "domains", c.domains);
  opt(j, "corpus_dir", c.corpus_dir);
  opt(j, "modes", c.modes);
  opt(j, "lambdas", c.lambdas);
  opt(j, "rhos", c.rhos);
  opt(j, "fisher_fractions", c.fisher_fractions);
  opt(j, "replay_ratios", c.replay_ratios);
  opt(j, "strategies", c.strategies);
  opt(j, "pooling", c.pooling);
  opt(j, "pca_dims", c.pca_dims);
  opt(j, "gmm_ks", c.gmm_ks);
  opt(j, "num_bins", c.num_bins);
  opt(j, "replay_capacity", c.replay_capacity);
  opt(j, "fisher_min_samples", c.fisher_min_samples);
  opt(j, "eval_batches", c.eval_batches);
  opt(j, "probe_enabled", c.probe_enabled);
  opt(j, "probe_layers", c.probe_layers);
  opt(j, "seeds", c.seeds);
  opt(j, "outdir", c.outdir);
  c.validate();
  return c;
}

std::string experiment_config_json(const ExperimentConfig& cfg) { return to_json(cfg).dump(2); }

void save_experiment_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config: " + path);
  out << experiment_config_json(cfg) << "\n";
}

std::string experiment_config_hash(const ExperimentConfig& cfg) {
  return hex64(fnv1a64(to_json(cfg).dump()));
}

}  // namespace mdpt::harness
