#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdpt/model/config.hpp"

namespace mdpt::harness {

// One JSON document drives a whole experiment. Grid defaults are the best
// values from the tuning setup (lambda 1.0, fisher fraction 0.001, rho 1.3).
struct ExperimentConfig {
  model::ModelConfig model{160, 2, 32, 2, 64, 128};

  // data
  size_t segment_length = 31;
  double mask_rate = 0.15;

  // training
  size_t base_steps = 400;    // stage-0 pre-training on the first domain
  size_t stage_steps = 300;   // each continuation stage
  size_t batch_size = 8;
  double lr = 3e-3;

  // staging: first domain is the base, the rest are continuation stages
  std::vector<std::string> domains = {"newswire", "biomed"};
  std::string corpus_dir;

  // mitigation modes to sweep; "ewc_nofisher" runs the ablation
  std::vector<std::string> modes = {"none", "ewc", "lrc", "er"};

  // grids
  std::vector<double> lambdas = {1.0};
  std::vector<double> rhos = {1.3};
  std::vector<double> fisher_fractions = {0.001};
  std::vector<double> replay_ratios = {0.5};
  std::vector<std::string> strategies = {"random"};
  std::string pooling = "avg";
  std::vector<size_t> pca_dims = {16};
  std::vector<size_t> gmm_ks = {5};
  size_t num_bins = 10;

  // artifacts
  size_t replay_capacity = 64;
  size_t fisher_min_samples = 32;
  size_t eval_batches = 24;
  bool probe_enabled = true;
  std::vector<size_t> probe_layers;  // empty = last encoder layer only

  std::vector<uint64_t> seeds = {1};
  std::string outdir = "runs/exp";

  void validate() const;
};

ExperimentConfig load_experiment_config(const std::string& path);
std::string experiment_config_json(const ExperimentConfig& cfg);
void save_experiment_config(const ExperimentConfig& cfg, const std::string& path);

// Stable hash of the canonical config serialization; names the run directory.
std::string experiment_config_hash(const ExperimentConfig& cfg);

}  // namespace mdpt::harness
