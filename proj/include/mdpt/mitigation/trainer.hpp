#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mdpt/data/masking.hpp"
#include "mdpt/data/replay.hpp"
#include "mdpt/mitigation/fisher.hpp"
#include "mdpt/model/checkpoint.hpp"
#include "mdpt/model/transformer.hpp"
#include "mdpt/numcore/optimizer.hpp"

namespace mdpt::mitigation {

enum class Mode { kNone, kEwc, kLrc, kEr, kMdl };

Mode parse_mode(const std::string& s);
std::string mode_name(Mode m);

struct MitigationConfig {
  Mode mode = Mode::kNone;
  double lambda = 1.0;             // EWC weight
  double fisher_fraction = 0.001;  // fraction of source segments for Fisher init
  bool use_fisher = true;          // false = no-Fisher ablation, F replaced by 1
  double rho = 1.3;                // LRC decay rate
  double replay_ratio = 0.5;       // ER batch-mixing ratio
  std::string strategy = "random"; // selection pipeline for Fisher/replay data

  void validate() const;
};

struct TrainConfig {
  size_t steps = 100;
  size_t batch_size = 8;
  double lr = 1e-3;  // top-group rate under LRC, uniform rate otherwise
  numcore::OptimizerConfig opt;
  data::MaskingConfig masking;
  uint64_t seed = 0;
};

struct LogRow {
  size_t step = 0;
  double task_loss = 0.0;
  double penalty = 0.0;
  double total_loss = 0.0;
};

struct TrainingLog {
  std::vector<double> group_lrs;  // effective LR per layer group
  std::vector<LogRow> rows;

  // CSV columns: step,task_loss,penalty,total_loss,lr_group_0..lr_group_{L+1}
  void write_csv(const std::string& path) const;
};

// Per-mode prerequisites; train_stage validates that the required ones exist.
struct StageArtifacts {
  const numcore::ParameterSet* ewc_anchor = nullptr;
  const FisherDiagonal* fisher = nullptr;
  const data::ReplayBuffer* replay = nullptr;
  const std::vector<data::Segment>* mdl_other = nullptr;  // second corpus for MDL
};

struct StageResult {
  model::Checkpoint checkpoint;
  TrainingLog log;
};

// Masked-LM training with the configured mitigation. EWC adds the anchor
// penalty each step, LRC trains with geometric per-group rates, ER draws
// mixed batches from the replay buffer, MDL interleaves two corpora by token
// proportion, kNone is plain training.
StageResult train_stage(const model::Checkpoint& start,
                        const std::vector<data::Segment>& segments, const TrainConfig& tcfg,
                        const MitigationConfig& mcfg, const StageArtifacts& artifacts,
                        const std::string& stage_name);

// Mean MLM loss per masked position over a fixed, deterministic batch set.
double evaluate_mlm_loss(const model::Transformer& model,
                         const std::vector<data::Segment>& segments,
                         const data::MaskingConfig& masking, size_t batch_size,
                         size_t max_batches, uint64_t seed);

}  // namespace mdpt::mitigation
