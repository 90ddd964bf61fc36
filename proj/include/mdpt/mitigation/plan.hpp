#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mdpt/mitigation/trainer.hpp"
#include "mdpt/selection/pipeline.hpp"

namespace mdpt::mitigation {

struct DomainSegments {
  std::vector<data::Segment> train;
  std::vector<data::Segment> valid;
};

using DomainMap = std::map<std::string, DomainSegments>;

struct StageSpec {
  std::string name;
  std::string domain;
  MitigationConfig mitigation;
  size_t steps = 100;
};

struct PlanConfig {
  std::vector<StageSpec> stages;
  std::vector<std::string> eval_domains;
  TrainConfig train;               // per-stage template; steps/seed set per stage
  size_t replay_capacity = 64;
  size_t fisher_min_samples = 16;  // desk-scale floor under fisher_fraction
  size_t eval_batches = 16;
  selection::SelectionParams selection;  // strategy is taken from each stage's config
  std::string artifact_dir;        // when set, fisher/buffer/log files are written here

  void validate(const DomainMap& domains) const;
};

struct StageOutcome {
  std::string stage;
  model::Checkpoint checkpoint;
  TrainingLog log;
  std::map<std::string, double> loss_before;  // per eval domain, held-out MLM loss
  std::map<std::string, double> loss_after;
  std::string fisher_path;   // empty when not produced
  std::string buffer_path;
  std::string log_path;
  std::vector<std::string> selection_paths;  // manifests of the selections used
};

struct PlanResult {
  std::vector<StageOutcome> stages;
};

// Executes stages in order. Between stages the mitigation artifacts are
// rebuilt: a new Fisher anchored at the just-finished checkpoint, the replay
// buffer re-selected from all previous domains with capacity split equally
// among them. Stage errors propagate with the stage name attached.
PlanResult run_plan(const PlanConfig& plan, const DomainMap& domains,
                    const std::optional<model::Checkpoint>& start,
                    const model::ModelConfig& fresh_config, uint64_t seed);

}  // namespace mdpt::mitigation
