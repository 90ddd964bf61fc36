#include "mdpt/harness/experiment.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "mdpt/analysis/probe.hpp"
#include "mdpt/analysis/similarity.hpp"
#include "mdpt/data/corpus.hpp"
#include "mdpt/util.hpp"

namespace mdpt::harness {

namespace fs = std::filesystem;
using nlohmann::json;

std::string GridPoint::json() const {
  return nlohmann::json{{"mode", mode},
                        {"lambda", lambda},
                        {"rho", rho},
                        {"fisher_fraction", fisher_fraction},
                        {"replay_ratio", replay_ratio},
                        {"strategy", strategy},
                        {"pca_dim", pca_dim},
                        {"gmm_k", gmm_k},
                        {"seed", seed}}
      .dump();
}

std::string GridPoint::id() const {
  return mode + "-seed" + std::to_string(seed) + "-" + hex64(fnv1a64(json())).substr(0, 8);
}

mitigation::MitigationConfig GridPoint::mitigation() const {
  mitigation::MitigationConfig m;
  if (mode == "ewc_nofisher") {
    m.mode = mitigation::Mode::kEwc;
    m.use_fisher = false;
  } else {
    m.mode = mitigation::parse_mode(mode);
  }
  m.lambda = lambda;
  m.rho = rho;
  m.fisher_fraction = fisher_fraction;
  m.replay_ratio = replay_ratio;
  m.strategy = strategy;
  return m;
}

std::vector<GridPoint> expand_grid(const ExperimentConfig& cfg) {
  std::vector<GridPoint> points;
  auto latent_dims = [&](const std::string& strategy, auto&& emit) {
    if (strategy == "latent") {
      for (size_t d : cfg.pca_dims)
        for (size_t k : cfg.gmm_ks) emit(d, k);
    } else {
      emit(cfg.pca_dims.front(), cfg.gmm_ks.front());
    }
  };
  for (const auto& mode : cfg.modes) {
    for (uint64_t seed : cfg.seeds) {
      GridPoint base;
      base.mode = mode;
      base.seed = seed;
      if (mode == "none" || mode == "mdl") {
        points.push_back(base);
      } else if (mode == "lrc") {
        for (double rho : cfg.rhos) {
          GridPoint p = base;
          p.rho = rho;
          points.push_back(p);
        }
      } else if (mode == "ewc" || mode == "ewc_nofisher") {
        for (double lambda : cfg.lambdas)
          for (double ff : cfg.fisher_fractions)
            for (const auto& strategy : cfg.strategies)
              latent_dims(strategy, [&](size_t d, size_t k) {
                GridPoint p = base;
                p.lambda = lambda;
                p.fisher_fraction = ff;
                p.strategy = strategy;
                p.pca_dim = d;
                p.gmm_k = k;
                points.push_back(p);
              });
      } else if (mode == "er") {
        for (double ratio : cfg.replay_ratios)
          for (const auto& strategy : cfg.strategies)
            latent_dims(strategy, [&](size_t d, size_t k) {
              GridPoint p = base;
              p.replay_ratio = ratio;
              p.strategy = strategy;
              p.pca_dim = d;
              p.gmm_k = k;
              points.push_back(p);
            });
      }
    }
  }
  return points;
}

std::string run_dir_for(const ExperimentConfig& cfg) {
  return cfg.outdir + "/" + experiment_config_hash(cfg);
}

namespace {

// Ingest seeds are fixed per domain index so every run of a config sees the
// same splits.
constexpr uint64_t kIngestStream = 0x1261E57ULL;
constexpr uint64_t kContinueStream = 0xC017ULL;

mitigation::DomainMap load_domains(const ExperimentConfig& cfg) {
  mitigation::DomainMap out;
  for (size_t i = 0; i < cfg.domains.size(); ++i) {
    const auto& name = cfg.domains[i];
    const std::string path = cfg.corpus_dir + "/" + name + ".txt";
    auto splits = data::ingest(path, name, derive_seed(kIngestStream, i));
    mitigation::DomainSegments segs;
    segs.train = data::segment_corpus(splits.train, cfg.segment_length);
    segs.valid = data::segment_corpus(splits.valid, cfg.segment_length);
    if (segs.train.empty() || segs.valid.empty())
      throw std::invalid_argument("domain " + name + " produced no segments");
    out.emplace(name, std::move(segs));
  }
  return out;
}

mitigation::PlanConfig plan_template(const ExperimentConfig& cfg) {
  mitigation::PlanConfig plan;
  plan.train.batch_size = cfg.batch_size;
  plan.train.lr = cfg.lr;
  plan.train.masking.rate = cfg.mask_rate;
  plan.train.masking.vocab_size = static_cast<int32_t>(cfg.model.vocab_size);
  plan.eval_domains = cfg.domains;
  plan.replay_capacity = cfg.replay_capacity;
  plan.fisher_min_samples = cfg.fisher_min_samples;
  plan.eval_batches = cfg.eval_batches;
  plan.selection.pooling = model::parse_pooling(cfg.pooling);
  plan.selection.num_bins = cfg.num_bins;
  return plan;
}

json losses_json(const std::map<std::string, double>& m) { return json(m); }

struct BaseRun {
  model::Checkpoint checkpoint;
  std::map<std::string, double> loss_after;
  std::string path;
};

BaseRun ensure_base(const ExperimentConfig& cfg, const mitigation::DomainMap& domains,
                    uint64_t seed, const std::string& run_dir) {
  const std::string dir = run_dir + "/base/seed_" + std::to_string(seed);
  const std::string ckpt_path = dir + "/base.ckpt";
  const std::string metrics_path = dir + "/metrics.json";
  BaseRun base;
  base.path = ckpt_path;
  if (fs::exists(ckpt_path) && fs::exists(metrics_path)) {
    base.checkpoint = model::load_checkpoint(ckpt_path);
    std::ifstream in(metrics_path);
    json j;
    in >> j;
    base.loss_after = j.at("loss_after").get<std::map<std::string, double>>();
    return base;
  }
  fs::create_directories(dir);
  mitigation::PlanConfig plan = plan_template(cfg);
  plan.artifact_dir = dir;
  plan.stages = {mitigation::StageSpec{"base-" + cfg.domains[0], cfg.domains[0],
                                       mitigation::MitigationConfig{}, cfg.base_steps}};
  auto result = mitigation::run_plan(plan, domains, std::nullopt, cfg.model, seed);
  base.checkpoint = result.stages.back().checkpoint;
  base.loss_after = result.stages.back().loss_after;
  model::save_checkpoint(base.checkpoint, ckpt_path);
  json j;
  j["loss_before"] = losses_json(result.stages.back().loss_before);
  j["loss_after"] = losses_json(base.loss_after);
  j["seed"] = seed;
  j["checkpoint"] = ckpt_path;
  std::ofstream out(metrics_path);
  out << j.dump(2) << "\n";
  return base;
}

void run_point(const ExperimentConfig& cfg, const mitigation::DomainMap& domains,
               const GridPoint& point, const BaseRun& base, const std::string& run_dir) {
  const std::string dir = run_dir + "/points/" + point.id();
  fs::create_directories(dir);
  {
    std::ofstream pj(dir + "/point.json");
    pj << point.json() << "\n";
  }

  mitigation::PlanConfig plan = plan_template(cfg);
  plan.artifact_dir = dir;
  plan.selection.pca_dim = point.pca_dim;
  plan.selection.gmm_k = point.gmm_k;
  for (size_t i = 1; i < cfg.domains.size(); ++i) {
    plan.stages.push_back(mitigation::StageSpec{
        "s" + std::to_string(i) + "-" + cfg.domains[i], cfg.domains[i], point.mitigation(),
        cfg.stage_steps});
  }

  auto result = mitigation::run_plan(plan, domains, base.checkpoint, cfg.model,
                                     derive_seed(point.seed, kContinueStream));

  json metrics;
  metrics["point"] = json::parse(point.json());
  metrics["point_id"] = point.id();
  metrics["base_checkpoint"] = base.path;
  metrics["base_loss"] = losses_json(base.loss_after);

  json stages = json::array();
  for (const auto& stage : result.stages) {
    const std::string ckpt_path = dir + "/" + stage.stage + ".ckpt";
    model::save_checkpoint(stage.checkpoint, ckpt_path);
    json s;
    s["name"] = stage.stage;
    s["checkpoint"] = ckpt_path;
    s["checkpoint_id"] = stage.checkpoint.meta.id;
    s["loss_before"] = losses_json(stage.loss_before);
    s["loss_after"] = losses_json(stage.loss_after);
    if (!stage.fisher_path.empty()) s["fisher"] = stage.fisher_path;
    if (!stage.buffer_path.empty()) s["buffer"] = stage.buffer_path;
    if (!stage.log_path.empty()) s["log"] = stage.log_path;
    s["selections"] = stage.selection_paths;
    stages.push_back(s);
  }
  metrics["stages"] = stages;

  const auto& final_stage = result.stages.back();
  metrics["final_loss"] = losses_json(final_stage.loss_after);
  json forgetting;
  double overall = 0.0;
  for (const auto& [domain, loss] : final_stage.loss_after) {
    forgetting[domain] = loss - base.loss_after.at(domain);
    overall += loss;
  }
  metrics["forgetting"] = forgetting;
  metrics["overall_loss"] = overall / static_cast<double>(final_stage.loss_after.size());

  if (cfg.probe_enabled) {
    std::vector<size_t> layers = cfg.probe_layers;
    if (layers.empty()) layers = {cfg.model.num_layers};
    json probes;
    for (const auto& domain : cfg.domains) {
      const std::string probe_path = cfg.corpus_dir + "/" + domain + ".probe.json";
      if (!fs::exists(probe_path)) continue;
      auto dataset = analysis::load_probe_dataset(probe_path);
      json per_layer;
      for (size_t l : layers) {
        auto res = analysis::probe_layer(final_stage.checkpoint, l, dataset,
                                         domain + "-lexicon", derive_seed(point.seed, l));
        per_layer[std::to_string(l)] = res.metric;
      }
      probes[domain] = per_layer;
    }
    metrics["probe"] = probes;
  }

  auto profile = analysis::layerwise_cosine(base.checkpoint, final_stage.checkpoint);
  analysis::write_profile_csv(dir + "/profile.csv", profile);
  metrics["profile_base_vs_final"] = profile.cosine;

  {
    std::ofstream out(dir + "/metrics.json");
    out << metrics.dump(2) << "\n";
  }
  std::ofstream done(dir + "/done");
  done << "ok\n";
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::string run_dir = run_dir_for(cfg);
  fs::create_directories(run_dir);
  save_experiment_config(cfg, run_dir + "/config.json");

  auto domains = load_domains(cfg);

  std::map<uint64_t, BaseRun> bases;
  for (uint64_t seed : cfg.seeds) bases.emplace(seed, ensure_base(cfg, domains, seed, run_dir));

  size_t ok = 0, failed = 0, skipped = 0;
  for (const GridPoint& point : expand_grid(cfg)) {
    const std::string dir = run_dir + "/points/" + point.id();
    if (fs::exists(dir + "/done")) {
      ++skipped;
      continue;
    }
    try {
      run_point(cfg, domains, point, bases.at(point.seed), run_dir);
      ++ok;
    } catch (const std::exception& e) {
      ++failed;
      fs::create_directories(dir);
      std::ofstream err(dir + "/error.txt");
      err << e.what() << "\n";
      std::cerr << "point " << point.id() << " failed: " << e.what() << "\n";
    }
  }

  write_run_report(run_dir);
  if (ok + skipped == 0) return 2;
  return 0;
}

}  // namespace mdpt::harness
