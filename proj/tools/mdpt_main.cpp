// Command-line experiment runner: corpus generation, staged pre-training with
// mitigation, data selection, probing, layer analysis and report emission.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "mdpt/analysis/probe.hpp"
#include "mdpt/analysis/similarity.hpp"
#include "mdpt/data/corpus.hpp"
#include "mdpt/harness/config.hpp"
#include "mdpt/harness/experiment.hpp"
#include "mdpt/harness/synth.hpp"
#include "mdpt/mitigation/fisher.hpp"
#include "mdpt/mitigation/plan.hpp"
#include "mdpt/model/checkpoint.hpp"
#include "mdpt/selection/pipeline.hpp"
#include "mdpt/util.hpp"

namespace {

using namespace mdpt;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

harness::ExperimentConfig config_or_default(const std::string& path) {
  if (path.empty()) return harness::ExperimentConfig{};
  return harness::load_experiment_config(path);
}

std::vector<data::Segment> train_segments(const std::string& corpus_path,
                                          const harness::ExperimentConfig& cfg,
                                          uint64_t ingest_seed) {
  auto splits = data::ingest(corpus_path, std::filesystem::path(corpus_path).stem().string(),
                             ingest_seed);
  return data::segment_corpus(splits.train, cfg.segment_length);
}

data::MaskingConfig masking_for(const harness::ExperimentConfig& cfg) {
  data::MaskingConfig m;
  m.rate = cfg.mask_rate;
  m.vocab_size = static_cast<int32_t>(cfg.model.vocab_size);
  return m;
}

int cmd_gen(const std::string& out, uint64_t seed, size_t docs, size_t tokens,
            const std::vector<std::string>& names) {
  auto specs = harness::default_domain_specs(docs, tokens);
  if (!names.empty()) {
    std::vector<harness::SyntheticDomainSpec> filtered;
    for (const auto& n : names) {
      bool found = false;
      for (const auto& s : specs)
        if (s.name == n) {
          filtered.push_back(s);
          found = true;
        }
      if (!found) throw std::invalid_argument("unknown built-in domain: " + n);
    }
    specs = std::move(filtered);
  }
  auto result = harness::gen_domains(specs, out, seed);
  for (const auto& d : result.domains)
    std::cout << d.name << " -> " << d.corpus_path << "\n";
  for (const auto& [pair, acc] : result.classifier_accuracy)
    std::cout << "separability " << pair << ": " << acc << "\n";
  return kExitOk;
}

int cmd_pretrain(const std::string& corpus, const std::string& out, uint64_t seed,
                 size_t steps, const std::string& config_path) {
  auto cfg = config_or_default(config_path);
  if (steps > 0) cfg.base_steps = steps;
  auto segments = train_segments(corpus, cfg, derive_seed(0x1261E57ULL, 0));
  mitigation::TrainConfig tcfg;
  tcfg.steps = cfg.base_steps;
  tcfg.batch_size = cfg.batch_size;
  tcfg.lr = cfg.lr;
  tcfg.masking = masking_for(cfg);
  tcfg.seed = seed;
  model::Checkpoint init;
  init.config = cfg.model;
  init.params = model::Transformer::init_params(cfg.model, seed);
  init.meta.stage = "init";
  init.meta.seed = seed;
  init.meta.id = "init-" + hex64(model::params_hash(init.params));
  auto result = mitigation::train_stage(init, segments, tcfg, mitigation::MitigationConfig{},
                                        mitigation::StageArtifacts{}, "pretrain");
  model::save_checkpoint(result.checkpoint, out);
  result.log.write_csv(out + ".train.csv");
  std::cout << "checkpoint " << result.checkpoint.meta.id << " -> " << out << "\n";
  return kExitOk;
}

int cmd_select(const std::string& ckpt_path, const std::string& corpus, size_t n,
               const std::string& strategy, uint64_t seed, const std::string& out,
               const std::string& features_csv, const std::string& config_path,
               const std::string& pooling, size_t pca_dim, size_t gmm_k, size_t bins) {
  auto cfg = config_or_default(config_path);
  auto ckpt = model::load_checkpoint(ckpt_path);
  cfg.model = ckpt.config;
  auto segments = train_segments(corpus, cfg, derive_seed(0x1261E57ULL, 0));
  model::Transformer m(ckpt.config, ckpt.params);
  selection::SelectionParams params;
  params.strategy = strategy;
  params.num_bins = bins;
  params.pooling = model::parse_pooling(pooling);
  params.pca_dim = pca_dim;
  params.gmm_k = gmm_k;
  params.masking = masking_for(cfg);
  auto result = selection::select_segments(m, segments, n, params, seed);
  selection::write_selection_manifest(out, result, params, seed, ckpt.meta.id);
  if (!features_csv.empty() && result.stats) {
    auto features = selection::gradient_features(m, segments, params.masking,
                                                 derive_seed(seed, 0));
    selection::write_features_csv(features_csv, features);
  }
  std::cout << "selected " << result.indices.size() << " of " << result.population << " -> "
            << out << "\n";
  return kExitOk;
}

int cmd_fisher(const std::string& ckpt_path, const std::string& corpus,
               const std::string& selection_manifest, size_t samples, uint64_t seed,
               const std::string& out, const std::string& config_path) {
  auto cfg = config_or_default(config_path);
  auto ckpt = model::load_checkpoint(ckpt_path);
  cfg.model = ckpt.config;
  auto segments = train_segments(corpus, cfg, derive_seed(0x1261E57ULL, 0));
  model::Transformer m(ckpt.config, ckpt.params);

  std::vector<size_t> indices;
  if (!selection_manifest.empty()) {
    indices = selection::load_selection_manifest(selection_manifest);
  } else {
    selection::SelectionParams params;
    params.strategy = "random";
    params.masking = masking_for(cfg);
    indices = selection::select_segments(m, segments, std::min(samples, segments.size()),
                                         params, seed)
                  .indices;
  }
  std::vector<data::MaskedBatch> batches;
  batches.reserve(indices.size());
  for (size_t j = 0; j < indices.size(); ++j)
    batches.push_back(data::mask_batch({segments.at(indices[j])}, masking_for(cfg),
                                       derive_seed(seed, 0xF15B + j)));
  auto fisher = mitigation::fisher_diagonal(m, batches, ckpt.meta.id);
  mitigation::save_fisher(fisher, out);
  std::cout << "fisher over " << fisher.sample_count << " samples -> " << out << "\n";
  return kExitOk;
}

int cmd_continue(const std::string& ckpt_path, const std::string& corpus,
                 const std::string& mode, size_t steps, uint64_t seed, const std::string& out,
                 const std::string& config_path, double lambda, double rho, double ratio,
                 const std::string& fisher_path, const std::string& replay_corpus,
                 const std::string& replay_selection, size_t capacity,
                 const std::string& log_path) {
  auto cfg = config_or_default(config_path);
  auto ckpt = model::load_checkpoint(ckpt_path);
  cfg.model = ckpt.config;
  auto segments = train_segments(corpus, cfg, derive_seed(0x1261E57ULL, 0));

  mitigation::MitigationConfig mcfg;
  if (mode == "ewc_nofisher") {
    mcfg.mode = mitigation::Mode::kEwc;
    mcfg.use_fisher = false;
  } else {
    mcfg.mode = mitigation::parse_mode(mode);
  }
  mcfg.lambda = lambda;
  mcfg.rho = rho;
  mcfg.replay_ratio = ratio;

  mitigation::StageArtifacts art;
  mitigation::FisherDiagonal fisher;
  std::optional<data::ReplayBuffer> buffer;
  std::vector<data::Segment> other;
  if (mcfg.mode == mitigation::Mode::kEwc) {
    art.ewc_anchor = &ckpt.params;
    if (mcfg.use_fisher) {
      if (fisher_path.empty())
        throw std::invalid_argument("continue: --fisher is required for mode ewc");
      fisher = mitigation::load_fisher(fisher_path);
      art.fisher = &fisher;
    }
  } else if (mcfg.mode == mitigation::Mode::kEr) {
    if (replay_corpus.empty() || replay_selection.empty())
      throw std::invalid_argument(
          "continue: --replay-corpus and --replay-selection are required for mode er");
    auto source = train_segments(replay_corpus, cfg, derive_seed(0x1261E57ULL, 0));
    auto indices = selection::load_selection_manifest(replay_selection);
    buffer = data::ReplayBuffer::build(source, indices, std::max(capacity, indices.size()),
                                       ratio,
                                       std::filesystem::path(replay_corpus).stem().string(),
                                       "manifest");
    art.replay = &*buffer;
  } else if (mcfg.mode == mitigation::Mode::kMdl) {
    if (replay_corpus.empty())
      throw std::invalid_argument("continue: --replay-corpus holds the second corpus for mdl");
    other = train_segments(replay_corpus, cfg, derive_seed(0x1261E57ULL, 0));
    art.mdl_other = &other;
  }

  mitigation::TrainConfig tcfg;
  tcfg.steps = steps > 0 ? steps : cfg.stage_steps;
  tcfg.batch_size = cfg.batch_size;
  tcfg.lr = cfg.lr;
  tcfg.masking = masking_for(cfg);
  tcfg.seed = seed;
  auto result = mitigation::train_stage(ckpt, segments, tcfg, mcfg, art, "continue-" + mode);
  model::save_checkpoint(result.checkpoint, out);
  result.log.write_csv(log_path.empty() ? out + ".train.csv" : log_path);
  std::cout << "checkpoint " << result.checkpoint.meta.id << " -> " << out << "\n";
  return kExitOk;
}

int cmd_probe(const std::string& ckpt_path, const std::string& probe_path, size_t layer,
              uint64_t seed, size_t epochs, double lr, const std::string& out) {
  auto ckpt = model::load_checkpoint(ckpt_path);
  auto dataset = analysis::load_probe_dataset(probe_path);
  analysis::ProbeConfig pcfg;
  pcfg.epochs = epochs;
  pcfg.lr = lr;
  auto result = analysis::probe_layer(ckpt, layer, dataset,
                                      std::filesystem::path(probe_path).stem().string(), seed,
                                      pcfg);
  nlohmann::json j{{"layer", result.layer},
                   {"task", result.task},
                   {"metric", result.metric},
                   {"epochs", result.config.epochs},
                   {"lr", result.config.lr}};
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream of(out);
    of << j.dump(2) << "\n";
  }
  return kExitOk;
}

int cmd_analyze(const std::string& a_path, const std::string& b_path, const std::string& out) {
  auto a = model::load_checkpoint(a_path);
  auto b = model::load_checkpoint(b_path);
  auto profile = analysis::layerwise_cosine(a, b);
  analysis::write_profile_csv(out, profile);
  std::ofstream raw(out + ".params.csv");
  raw << "parameter,cosine\n";
  raw.precision(17);
  for (const auto& [name, cos] : analysis::per_parameter_cosine(a, b))
    raw << name << "," << cos << "\n";
  for (size_t g = 0; g < profile.cosine.size(); ++g)
    std::cout << "group " << g << ": " << profile.cosine[g] << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale continual pre-training toolkit"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate synthetic domain corpora");
  std::string gen_out = "corpora";
  uint64_t gen_seed = 0;
  size_t gen_docs = 300, gen_tokens = 400;
  std::vector<std::string> gen_names;
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--seed", gen_seed, "generation seed")->required();
  gen->add_option("--docs", gen_docs, "documents per domain");
  gen->add_option("--tokens-per-doc", gen_tokens, "approximate bytes per document");
  gen->add_option("--domains", gen_names, "subset of newswire,biomed,clinical");

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "train a fresh model on one corpus");
  std::string pre_corpus, pre_out = "base.ckpt", pre_config;
  uint64_t pre_seed = 0;
  size_t pre_steps = 0;
  pre->add_option("--corpus", pre_corpus)->required();
  pre->add_option("--out", pre_out);
  pre->add_option("--seed", pre_seed)->required();
  pre->add_option("--steps", pre_steps, "override config base_steps");
  pre->add_option("--config", pre_config, "experiment config JSON");

  // select
  auto* sel = app.add_subcommand("select", "run a data-selection pipeline");
  std::string sel_ckpt, sel_corpus, sel_strategy = "random", sel_out = "selection.json";
  std::string sel_features, sel_config, sel_pooling = "avg";
  size_t sel_n = 64, sel_pca = 16, sel_gmm = 5, sel_bins = 10;
  uint64_t sel_seed = 0;
  sel->add_option("--ckpt", sel_ckpt)->required();
  sel->add_option("--corpus", sel_corpus)->required();
  sel->add_option("--n", sel_n);
  sel->add_option("--strategy", sel_strategy,
                  "random|grad_low|grad_high|grad_uniform|latent");
  sel->add_option("--seed", sel_seed)->required();
  sel->add_option("--out", sel_out);
  sel->add_option("--features-csv", sel_features, "also dump scalar features");
  sel->add_option("--config", sel_config);
  sel->add_option("--pooling", sel_pooling, "cls|avg");
  sel->add_option("--pca-d", sel_pca);
  sel->add_option("--gmm-k", sel_gmm);
  sel->add_option("--bins", sel_bins);

  // fisher
  auto* fis = app.add_subcommand("fisher", "build a Fisher diagonal at a checkpoint");
  std::string fis_ckpt, fis_corpus, fis_selection, fis_out = "fisher.blob", fis_config;
  size_t fis_samples = 64;
  uint64_t fis_seed = 0;
  fis->add_option("--ckpt", fis_ckpt)->required();
  fis->add_option("--corpus", fis_corpus)->required();
  fis->add_option("--selection", fis_selection, "selection manifest; random if omitted");
  fis->add_option("--samples", fis_samples);
  fis->add_option("--seed", fis_seed)->required();
  fis->add_option("--out", fis_out);
  fis->add_option("--config", fis_config);

  // continue
  auto* cont = app.add_subcommand("continue", "continue pre-training with mitigation");
  std::string c_ckpt, c_corpus, c_mode = "none", c_out = "stage.ckpt", c_config;
  std::string c_fisher, c_replay_corpus, c_replay_selection, c_log;
  size_t c_steps = 0, c_capacity = 64;
  uint64_t c_seed = 0;
  double c_lambda = 1.0, c_rho = 1.3, c_ratio = 0.5;
  cont->add_option("--ckpt", c_ckpt)->required();
  cont->add_option("--corpus", c_corpus)->required();
  cont->add_option("--mode", c_mode, "none|ewc|ewc_nofisher|lrc|er|mdl");
  cont->add_option("--steps", c_steps);
  cont->add_option("--seed", c_seed)->required();
  cont->add_option("--out", c_out);
  cont->add_option("--config", c_config);
  cont->add_option("--lambda", c_lambda);
  cont->add_option("--rho", c_rho);
  cont->add_option("--ratio", c_ratio);
  cont->add_option("--fisher", c_fisher);
  cont->add_option("--replay-corpus", c_replay_corpus,
                   "source corpus for er buffer or mdl second corpus");
  cont->add_option("--replay-selection", c_replay_selection);
  cont->add_option("--capacity", c_capacity);
  cont->add_option("--log", c_log);

  // probe
  auto* prb = app.add_subcommand("probe", "linear probe on frozen layer features");
  std::string p_ckpt, p_probe, p_out;
  size_t p_layer = 0, p_epochs = 20;
  double p_lr = 1e-2;
  uint64_t p_seed = 0;
  prb->add_option("--ckpt", p_ckpt)->required();
  prb->add_option("--probe", p_probe, "probe dataset JSON")->required();
  prb->add_option("--layer", p_layer)->required();
  prb->add_option("--seed", p_seed)->required();
  prb->add_option("--epochs", p_epochs);
  prb->add_option("--lr", p_lr);
  prb->add_option("--out", p_out);

  // analyze
  auto* ana = app.add_subcommand("analyze", "layer-wise weight cosine profile");
  std::string a_a, a_b, a_out = "profile.csv";
  ana->add_option("--a", a_a)->required();
  ana->add_option("--b", a_b)->required();
  ana->add_option("--out", a_out);

  // report
  auto* rep = app.add_subcommand("report", "consolidate a run directory");
  std::string r_dir;
  rep->add_option("--run-dir", r_dir)->required();

  // run
  auto* run = app.add_subcommand("run", "execute a full experiment config");
  std::string run_config;
  run->add_option("--config", run_config)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(gen_out, gen_seed, gen_docs, gen_tokens, gen_names);
    if (pre->parsed()) return cmd_pretrain(pre_corpus, pre_out, pre_seed, pre_steps, pre_config);
    if (sel->parsed())
      return cmd_select(sel_ckpt, sel_corpus, sel_n, sel_strategy, sel_seed, sel_out,
                        sel_features, sel_config, sel_pooling, sel_pca, sel_gmm, sel_bins);
    if (fis->parsed())
      return cmd_fisher(fis_ckpt, fis_corpus, fis_selection, fis_samples, fis_seed, fis_out,
                        fis_config);
    if (cont->parsed())
      return cmd_continue(c_ckpt, c_corpus, c_mode, c_steps, c_seed, c_out, c_config, c_lambda,
                          c_rho, c_ratio, c_fisher, c_replay_corpus, c_replay_selection,
                          c_capacity, c_log);
    if (prb->parsed()) return cmd_probe(p_ckpt, p_probe, p_layer, p_seed, p_epochs, p_lr, p_out);
    if (ana->parsed()) return cmd_analyze(a_a, a_b, a_out);
    if (rep->parsed()) {
      mdpt::harness::write_run_report(r_dir);
      return kExitOk;
    }
    if (run->parsed()) {
      auto cfg = mdpt::harness::load_experiment_config(run_config);
      return mdpt::harness::run_experiment(cfg);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}
