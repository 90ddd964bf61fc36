#include "mdpt/mitigation/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "mdpt/mitigation/ewc.hpp"
#include "mdpt/mitigation/lrc.hpp"
#include "mdpt/util.hpp"

namespace mdpt::mitigation {

using data::Segment;
using model::Checkpoint;
using model::Transformer;
using numcore::Optimizer;
using numcore::Tape;

Mode parse_mode(const std::string& s) {
  if (s == "none") return Mode::kNone;
  if (s == "ewc") return Mode::kEwc;
  if (s == "lrc") return Mode::kLrc;
  if (s == "er") return Mode::kEr;
  if (s == "mdl") return Mode::kMdl;
  throw std::invalid_argument("unknown mitigation mode: " + s);
}

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::kNone: return "none";
    case Mode::kEwc: return "ewc";
    case Mode::kLrc: return "lrc";
    case Mode::kEr: return "er";
    case Mode::kMdl: return "mdl";
  }
  return "?";
}

void MitigationConfig::validate() const {
  if (lambda < 0.0) throw std::invalid_argument("MitigationConfig: lambda must be >= 0");
  if (rho < 1.0) throw std::invalid_argument("MitigationConfig: rho must be >= 1");
  if (replay_ratio < 0.0 || replay_ratio > 1.0)
    throw std::invalid_argument("MitigationConfig: replay ratio must be in [0,1]");
  if (fisher_fraction <= 0.0 || fisher_fraction > 1.0)
    throw std::invalid_argument("MitigationConfig: fisher_fraction must be in (0,1]");
}

void TrainingLog::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write training log: " + path);
  out << "step,task_loss,penalty,total_loss";
  for (size_t g = 0; g < group_lrs.size(); ++g) out << ",lr_group_" << g;
  out << "\n";
  out.precision(17);
  for (const auto& r : rows) {
    out << r.step << "," << r.task_loss << "," << r.penalty << "," << r.total_loss;
    for (double lr : group_lrs) out << "," << lr;
    out << "\n";
  }
}

namespace {

void check_prerequisites(const MitigationConfig& mcfg, const StageArtifacts& art) {
  if (mcfg.mode == Mode::kEwc) {
    if (art.ewc_anchor == nullptr)
      throw std::invalid_argument("train_stage: ewc mode requires an anchor parameter set");
    if (mcfg.use_fisher && art.fisher == nullptr)
      throw std::invalid_argument("train_stage: ewc mode requires a FisherDiagonal");
  }
  if (mcfg.mode == Mode::kEr && art.replay == nullptr)
    throw std::invalid_argument("train_stage: er mode requires a ReplayBuffer");
  if (mcfg.mode == Mode::kMdl && art.mdl_other == nullptr)
    throw std::invalid_argument("train_stage: mdl mode requires the second corpus");
}

}  // namespace

StageResult train_stage(const Checkpoint& start, const std::vector<Segment>& segments,
                        const TrainConfig& tcfg, const MitigationConfig& mcfg,
                        const StageArtifacts& art, const std::string& stage_name) {
  mcfg.validate();
  check_prerequisites(mcfg, art);
  if (segments.empty()) throw std::invalid_argument("train_stage: no training segments");

  Transformer model(start.config, start.params);
  const size_t num_groups = start.config.num_groups();

  std::vector<double> group_lrs;
  if (mcfg.mode == Mode::kLrc)
    group_lrs = lrc_schedule(tcfg.lr, mcfg.rho, num_groups);
  else
    group_lrs.assign(num_groups, tcfg.lr);
  Optimizer opt(tcfg.opt, model.group_map(), group_lrs);

  data::SegmentStream stream(&segments, derive_seed(tcfg.seed, 0xA11CE));
  std::mt19937_64 mix_rng(derive_seed(tcfg.seed, 0xB0B));

  // MDL interleaves by token-count proportion of the two corpora.
  std::optional<data::SegmentStream> other_stream;
  size_t mdl_other_per_batch = 0;
  if (mcfg.mode == Mode::kMdl) {
    other_stream.emplace(art.mdl_other, derive_seed(tcfg.seed, 0xD1));
    size_t tok_cur = 0, tok_other = 0;
    for (const auto& s : segments) tok_cur += s.tokens.size();
    for (const auto& s : *art.mdl_other) tok_other += s.tokens.size();
    const double frac = static_cast<double>(tok_other) /
                        static_cast<double>(std::max<size_t>(1, tok_cur + tok_other));
    mdl_other_per_batch = std::min(
        tcfg.batch_size,
        static_cast<size_t>(std::llround(frac * static_cast<double>(tcfg.batch_size))));
  }

  TrainingLog log;
  log.group_lrs = group_lrs;
  log.rows.reserve(tcfg.steps);

  for (size_t step = 0; step < tcfg.steps; ++step) {
    std::vector<Segment> batch;
    batch.reserve(tcfg.batch_size);
    if (mcfg.mode == Mode::kEr && mcfg.replay_ratio > 0.0) {
      auto mixed = data::mix_batch(stream, *art.replay, tcfg.batch_size, mix_rng);
      batch = std::move(mixed.segments);
    } else if (mcfg.mode == Mode::kMdl) {
      for (size_t i = 0; i < mdl_other_per_batch; ++i) batch.push_back(other_stream->next());
      while (batch.size() < tcfg.batch_size) batch.push_back(stream.next());
      std::shuffle(batch.begin(), batch.end(), mix_rng);
    } else {
      for (size_t i = 0; i < tcfg.batch_size; ++i) batch.push_back(stream.next());
    }

    try {
      auto masked = data::mask_batch(batch, tcfg.masking, derive_seed(tcfg.seed, step));
      Tape tape;
      auto mlm = model.mlm_forward(tape, masked);
      const double task_loss = tape.scalar(mlm.loss);
      double penalty = 0.0;
      numcore::Value total = mlm.loss;
      if (mcfg.mode == Mode::kEwc) {
        numcore::Value pen = ewc_penalty(tape, model.params(), *art.ewc_anchor, art.fisher,
                                         mcfg.lambda, mcfg.use_fisher);
        penalty = tape.scalar(pen);
        total = tape.add(mlm.loss, pen);
      }
      const double total_loss = tape.scalar(total);
      auto grads = tape.backprop(total);
      opt.step(model.params(), grads);
      log.rows.push_back(LogRow{step, task_loss, penalty, total_loss});
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("train_stage '" + stage_name + "' aborted at step " +
                               std::to_string(step) + ": " + e.what());
    }
  }

  StageResult result{Checkpoint{start.config, model.params(), {}}, std::move(log)};
  result.checkpoint.meta.stage = stage_name;
  result.checkpoint.meta.step_count = start.meta.step_count + tcfg.steps;
  result.checkpoint.meta.seed = tcfg.seed;
  result.checkpoint.meta.parent_id = start.meta.id;
  result.checkpoint.meta.id =
      stage_name + "-" + hex64(model::params_hash(result.checkpoint.params));
  return result;
}

double evaluate_mlm_loss(const Transformer& model, const std::vector<Segment>& segments,
                         const data::MaskingConfig& masking, size_t batch_size,
                         size_t max_batches, uint64_t seed) {
  if (segments.empty()) throw std::invalid_argument("evaluate_mlm_loss: no segments");
  if (batch_size == 0) throw std::invalid_argument("evaluate_mlm_loss: batch_size is zero");
  double ce_sum = 0.0;
  size_t target_total = 0;
  size_t batches = 0;
  for (size_t off = 0; off < segments.size() && batches < max_batches;
       off += batch_size, ++batches) {
    const size_t end = std::min(off + batch_size, segments.size());
    std::vector<Segment> batch(segments.begin() + static_cast<ptrdiff_t>(off),
                               segments.begin() + static_cast<ptrdiff_t>(end));
    auto masked = data::mask_batch(batch, masking, derive_seed(seed, batches));
    Tape tape;
    auto mlm = model.mlm_forward(tape, masked);
    const size_t nt = masked.target_count();
    ce_sum += tape.scalar(mlm.loss) * static_cast<double>(nt);
    target_total += nt;
  }
  return ce_sum / static_cast<double>(target_total);
}

}  // namespace mdpt::mitigation
