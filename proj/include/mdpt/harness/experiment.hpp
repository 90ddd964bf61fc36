#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mdpt/harness/config.hpp"
#include "mdpt/mitigation/plan.hpp"

namespace mdpt::harness {

// One grid point: a mitigation configuration plus a seed. The full schema is
// serialized for every point so point ids are stable.
struct GridPoint {
  std::string mode;  // none | ewc | ewc_nofisher | lrc | er | mdl
  double lambda = 1.0;
  double rho = 1.3;
  double fisher_fraction = 0.001;
  double replay_ratio = 0.5;
  std::string strategy = "random";
  size_t pca_dim = 16;
  size_t gmm_k = 5;
  uint64_t seed = 0;

  std::string json() const;
  std::string id() const;  // <mode>-seed<seed>-<hash8>
  mitigation::MitigationConfig mitigation() const;
};

std::vector<GridPoint> expand_grid(const ExperimentConfig& cfg);

// Loads corpora, ensures per-seed base checkpoints, executes every grid
// point (skipping finished ones by id), then writes the consolidated report.
// Stage failures are recorded and the run continues; returns 0 if at least
// one point succeeded, 2 otherwise.
int run_experiment(const ExperimentConfig& cfg);

// Re-aggregates an existing run directory into report.{json,csv,txt}.
void write_run_report(const std::string& run_dir);

std::string run_dir_for(const ExperimentConfig& cfg);

}  // namespace mdpt::harness
