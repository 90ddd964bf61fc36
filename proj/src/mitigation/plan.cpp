#include "mdpt/mitigation/plan.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "mdpt/util.hpp"

namespace mdpt::mitigation {

using data::Segment;
using model::Checkpoint;
using model::Transformer;

namespace {

// Held-out masking is fixed per domain index, independent of the run seed, so
// losses are comparable across runs and stages.
uint64_t eval_seed_for(size_t domain_index) { return derive_seed(0xE7A1u, domain_index); }

std::vector<size_t> equal_split(size_t total, size_t parts) {
  std::vector<size_t> out(parts, total / parts);
  for (size_t i = 0; i < total % parts; ++i) ++out[i];
  return out;
}

}  // namespace

void PlanConfig::validate(const DomainMap& domains) const {
  if (stages.empty()) throw std::invalid_argument("run_plan: plan has no stages");
  std::set<std::string> names;
  for (const auto& s : stages) {
    if (!names.insert(s.name).second)
      throw std::invalid_argument("run_plan: duplicate stage name " + s.name);
    if (domains.find(s.domain) == domains.end())
      throw std::invalid_argument("run_plan: unknown domain " + s.domain + " in stage " +
                                  s.name);
    s.mitigation.validate();
  }
  for (const auto& d : eval_domains)
    if (domains.find(d) == domains.end())
      throw std::invalid_argument("run_plan: unknown eval domain " + d);
}

PlanResult run_plan(const PlanConfig& plan, const DomainMap& domains,
                    const std::optional<Checkpoint>& start,
                    const model::ModelConfig& fresh_config, uint64_t seed) {
  plan.validate(domains);

  Checkpoint current;
  if (start) {
    current = *start;
  } else {
    current.config = fresh_config;
    current.params = Transformer::init_params(fresh_config, seed);
    current.meta.stage = "init";
    current.meta.seed = seed;
    current.meta.id = "init-" + hex64(model::params_hash(current.params));
  }

  PlanResult result;
  std::vector<std::string> prev_domains;  // ordered, unique

  auto evaluate_all = [&](const Transformer& m) {
    std::map<std::string, double> losses;
    for (size_t d = 0; d < plan.eval_domains.size(); ++d) {
      const auto& name = plan.eval_domains[d];
      losses[name] = evaluate_mlm_loss(m, domains.at(name).valid, plan.train.masking,
                                       plan.train.batch_size, plan.eval_batches,
                                       eval_seed_for(d));
    }
    return losses;
  };

  for (size_t si = 0; si < plan.stages.size(); ++si) {
    const StageSpec& spec = plan.stages[si];
    const MitigationConfig& mcfg = spec.mitigation;
    const uint64_t stage_seed = si == 0 ? seed : derive_seed(seed, si);

    try {
      StageArtifacts art;
      FisherDiagonal fisher;
      std::optional<data::ReplayBuffer> buffer;
      std::vector<Segment> mdl_other;
      StageOutcome outcome;
      outcome.stage = spec.name;

      const bool needs_sources =
          mcfg.mode == Mode::kEwc || mcfg.mode == Mode::kEr || mcfg.mode == Mode::kMdl;
      if (needs_sources && prev_domains.empty())
        throw std::invalid_argument(mode_name(mcfg.mode) +
                                    " requires at least one previously trained domain");

      Transformer anchor_model(current.config, current.params);
      selection::SelectionParams sel = plan.selection;
      sel.strategy = mcfg.strategy;
      sel.masking = plan.train.masking;

      auto record_selection = [&](const selection::SelectionResult& picked,
                                  uint64_t sel_seed, const std::string& role,
                                  const std::string& domain) {
        if (plan.artifact_dir.empty()) return;
        const std::string path =
            plan.artifact_dir + "/" + spec.name + "." + role + "." + domain + ".selection.json";
        selection::write_selection_manifest(path, picked, sel, sel_seed, current.meta.id);
        outcome.selection_paths.push_back(path);
      };

      if (mcfg.mode == Mode::kEwc) {
        art.ewc_anchor = &current.params;
        if (mcfg.use_fisher) {
          size_t total_prev = 0;
          for (const auto& d : prev_domains) total_prev += domains.at(d).train.size();
          size_t n_total = std::max<size_t>(
              plan.fisher_min_samples,
              static_cast<size_t>(mcfg.fisher_fraction * static_cast<double>(total_prev)));
          n_total = std::min(n_total, total_prev);
          auto per_domain = equal_split(n_total, prev_domains.size());
          std::vector<data::MaskedBatch> samples;
          samples.reserve(n_total);
          for (size_t d = 0; d < prev_domains.size(); ++d) {
            const auto& segs = domains.at(prev_domains[d]).train;
            const size_t want = std::min(per_domain[d], segs.size());
            if (want == 0) continue;
            const uint64_t sel_seed = derive_seed(stage_seed, 0x5E1 + d);
            auto picked = selection::select_segments(anchor_model, segs, want, sel, sel_seed);
            record_selection(picked, sel_seed, "fisher", prev_domains[d]);
            for (size_t j = 0; j < picked.indices.size(); ++j) {
              // Fresh masking seed per sample; batch of one keeps gradients
              // per-sample as Eq-style Fisher requires.
              samples.push_back(data::mask_batch({segs[picked.indices[j]]}, plan.train.masking,
                                                 derive_seed(stage_seed, 0xF15B + d * 100003 + j)));
            }
          }
          fisher = fisher_diagonal(anchor_model, samples, current.meta.id);
          if (!plan.artifact_dir.empty()) {
            outcome.fisher_path = plan.artifact_dir + "/" + spec.name + ".fisher";
            save_fisher(fisher, outcome.fisher_path);
          }
          art.fisher = &fisher;
        }
      } else if (mcfg.mode == Mode::kEr) {
        auto per_domain = equal_split(plan.replay_capacity, prev_domains.size());
        std::vector<data::ReplayEntry> entries;
        for (size_t d = 0; d < prev_domains.size(); ++d) {
          const auto& segs = domains.at(prev_domains[d]).train;
          const size_t want = std::min(per_domain[d], segs.size());
          if (want == 0) continue;
          const uint64_t sel_seed = derive_seed(stage_seed, 0xE2 + d);
          auto picked = selection::select_segments(anchor_model, segs, want, sel, sel_seed);
          record_selection(picked, sel_seed, "replay", prev_domains[d]);
          for (size_t idx : picked.indices)
            entries.push_back(
                data::ReplayEntry{segs[idx], prev_domains[d], idx, mcfg.strategy});
        }
        buffer.emplace(std::move(entries), plan.replay_capacity, mcfg.replay_ratio);
        if (!plan.artifact_dir.empty()) {
          outcome.buffer_path = plan.artifact_dir + "/" + spec.name + ".buffer.json";
          buffer->write_manifest(outcome.buffer_path);
        }
        art.replay = &*buffer;
      } else if (mcfg.mode == Mode::kMdl) {
        for (const auto& d : prev_domains) {
          const auto& segs = domains.at(d).train;
          mdl_other.insert(mdl_other.end(), segs.begin(), segs.end());
        }
        art.mdl_other = &mdl_other;
      }

      outcome.loss_before = evaluate_all(anchor_model);

      TrainConfig tcfg = plan.train;
      tcfg.steps = spec.steps;
      tcfg.seed = stage_seed;
      StageResult stage = train_stage(current, domains.at(spec.domain).train, tcfg, mcfg,
                                      art, spec.name);

      Transformer trained(stage.checkpoint.config, stage.checkpoint.params);
      outcome.loss_after = evaluate_all(trained);
      outcome.checkpoint = std::move(stage.checkpoint);
      outcome.log = std::move(stage.log);
      if (!plan.artifact_dir.empty()) {
        outcome.log_path = plan.artifact_dir + "/" + spec.name + ".train.csv";
        outcome.log.write_csv(outcome.log_path);
      }

      current = outcome.checkpoint;
      if (std::find(prev_domains.begin(), prev_domains.end(), spec.domain) ==
          prev_domains.end())
        prev_domains.push_back(spec.domain);
      result.stages.push_back(std::move(outcome));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("stage '" + spec.name + "': " + e.what());
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("stage '" + spec.name + "': " + e.what());
    }
  }
  return result;
}

}  // namespace mdpt::mitigation
