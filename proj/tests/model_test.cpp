#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "mdpt/data/masking.hpp"
#include "mdpt/data/vocab.hpp"
#include "mdpt/model/checkpoint.hpp"
#include "mdpt/model/transformer.hpp"
#include "mdpt/numcore/optimizer.hpp"

using namespace mdpt;
using model::Checkpoint;
using model::ModelConfig;
using model::Transformer;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.vocab_size = 64;
  cfg.num_layers = 2;
  cfg.hidden_dim = 16;
  cfg.num_heads = 2;
  cfg.max_seq_len = 32;
  cfg.ff_dim = 32;
  return cfg;
}

data::Segment make_segment(const std::vector<int32_t>& content) {
  data::Segment s;
  s.tokens.push_back(data::kBosToken);
  s.tokens.insert(s.tokens.end(), content.begin(), content.end());
  return s;
}

data::MaskedBatch masked_from(const std::vector<data::Segment>& segs, int32_t vocab,
                              uint64_t seed) {
  data::MaskingConfig mcfg;
  mcfg.rate = 0.3;
  mcfg.vocab_size = vocab;
  return data::mask_batch(segs, mcfg, seed);
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("fresh model yields near-uniform MLM loss ~ ln(vocab)") {
  ModelConfig cfg;
  cfg.vocab_size = 256;
  cfg.num_layers = 2;
  cfg.hidden_dim = 32;
  cfg.num_heads = 2;
  cfg.max_seq_len = 64;
  cfg.ff_dim = 64;
  auto m = Transformer::init(cfg, 7);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int32_t> tok(data::kFirstByteToken, 255);
  std::vector<data::Segment> segs;
  for (int i = 0; i < 4; ++i) {
    std::vector<int32_t> content(40);
    for (auto& t : content) t = tok(rng);
    segs.push_back(make_segment(content));
  }
  auto batch = masked_from(segs, 256, 11);
  numcore::Tape tape;
  auto out = m.mlm_forward(tape, batch);
  CHECK(tape.scalar(out.loss) == doctest::Approx(std::log(256.0)).epsilon(0.15 / std::log(256.0)));
}

TEST_CASE("mlm_forward rejects a batch with no targets") {
  auto m = Transformer::init(tiny_config(), 1);
  data::MaskedBatch batch;
  batch.batch = 1;
  batch.seq = 4;
  batch.input_ids = {data::kBosToken, 5, 6, 7};
  batch.target_ids = {0, 0, 0, 0};
  batch.target_mask = {0, 0, 0, 0};
  batch.key_valid = {1, 1, 1, 1};
  numcore::Tape tape;
  CHECK_THROWS_AS((void)m.mlm_forward(tape, batch), std::invalid_argument);
}

TEST_CASE("mlm_forward rejects sequences over the max length and bad token ids") {
  auto cfg = tiny_config();
  auto m = Transformer::init(cfg, 1);
  std::vector<int32_t> content(cfg.max_seq_len + 3, 5);
  auto batch = masked_from({make_segment(content)}, static_cast<int32_t>(cfg.vocab_size), 1);
  numcore::Tape tape;
  CHECK_THROWS_AS((void)m.mlm_forward(tape, batch), std::invalid_argument);

  data::MaskedBatch bad;
  bad.batch = 1;
  bad.seq = 2;
  bad.input_ids = {data::kBosToken, static_cast<int32_t>(cfg.vocab_size)};
  bad.target_ids = {0, static_cast<int32_t>(cfg.vocab_size)};
  bad.target_mask = {0, 1};
  bad.key_valid = {1, 1};
  numcore::Tape t2;
  CHECK_THROWS_AS((void)m.mlm_forward(t2, bad), std::invalid_argument);
}

TEST_CASE("masked loss ignores labels at non-target positions") {
  auto cfg = tiny_config();
  auto m = Transformer::init(cfg, 5);
  auto batch = masked_from({make_segment({5, 6, 7, 8, 9, 10, 11, 12})},
                           static_cast<int32_t>(cfg.vocab_size), 21);
  numcore::Tape t1;
  const double loss1 = t1.scalar(m.mlm_forward(t1, batch).loss);
  auto perturbed = batch;
  for (size_t i = 0; i < perturbed.target_mask.size(); ++i)
    if (!perturbed.target_mask[i]) perturbed.target_ids[i] = 63;  // garbage labels
  numcore::Tape t2;
  const double loss2 = t2.scalar(m.mlm_forward(t2, perturbed).loss);
  CHECK(loss1 == loss2);
}

TEST_CASE("model overfits a 10-sentence corpus to loss < 1.0 within 500 steps") {
  auto cfg = tiny_config();
  auto m = Transformer::init(cfg, 123);
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int32_t> tok(data::kFirstByteToken, 30);
  std::vector<data::Segment> corpus;
  for (int i = 0; i < 10; ++i) {
    std::vector<int32_t> content(16);
    for (auto& t : content) t = tok(rng);
    corpus.push_back(make_segment(content));
  }
  auto opt = numcore::Optimizer::uniform(numcore::OptimizerConfig{}, 3e-3);
  double loss = 1e9;
  for (int step = 0; step < 500; ++step) {
    auto batch = masked_from(corpus, static_cast<int32_t>(cfg.vocab_size),
                             1000 + static_cast<uint64_t>(step));
    numcore::Tape tape;
    auto out = m.mlm_forward(tape, batch);
    loss = tape.scalar(out.loss);
    auto grads = tape.backprop(out.loss);
    opt.step(m.params(), grads);
  }
  CHECK(loss < 1.0);
}

TEST_CASE("encode: single <s> segment makes cls and avg identical") {
  auto m = Transformer::init(tiny_config(), 2);
  data::Segment s;
  s.tokens = {data::kBosToken};
  auto cls = m.encode(s, model::Pooling::kCls);
  auto avg = m.encode(s, model::Pooling::kAvg);
  CHECK(cls == avg);
}

TEST_CASE("encode: deterministic and exactly the mean of last-layer states") {
  auto m = Transformer::init(tiny_config(), 2);
  auto s = make_segment({5, 9, 13, 17});
  auto v1 = m.encode(s, model::Pooling::kAvg);
  auto v2 = m.encode(s, model::Pooling::kAvg);
  CHECK(v1 == v2);

  auto states = m.hidden_states(s.tokens, tiny_config().num_layers);
  std::vector<double> mean(v1.size(), 0.0);
  for (const auto& row : states)
    for (size_t j = 0; j < row.size(); ++j) mean[j] += row[j];
  for (auto& v : mean) v /= static_cast<double>(states.size());
  for (size_t j = 0; j < mean.size(); ++j)
    CHECK(v1[j] == doctest::Approx(mean[j]).epsilon(1e-12));
}

TEST_CASE("encode rejects segments not starting with <s>") {
  auto m = Transformer::init(tiny_config(), 2);
  data::Segment s;
  s.tokens = {5, 6};
  CHECK_THROWS_AS((void)m.encode(s, model::Pooling::kAvg), std::invalid_argument);
  CHECK_THROWS_AS((void)model::parse_pooling("mean"), std::invalid_argument);
}

TEST_CASE("same-domain segments are closer than cross-domain segments") {
  auto cfg = tiny_config();
  auto m = Transformer::init(cfg, 31);
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int32_t> tok_a(data::kFirstByteToken, 20);
  std::uniform_int_distribution<int32_t> tok_b(40, 60);  // disjoint token range
  auto make = [&](auto& dist) {
    std::vector<int32_t> content(12);
    for (auto& t : content) t = dist(rng);
    return m.encode(make_segment(content), model::Pooling::kAvg);
  };
  auto cosine = [](const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
      d += a[i] * b[i];
      na += a[i] * a[i];
      nb += b[i] * b[i];
    }
    return d / std::sqrt(na * nb);
  };
  double same = 0.0, cross = 0.0;
  const int pairs = 100;
  for (int i = 0; i < pairs; ++i) {
    auto a1 = make(tok_a), a2 = make(tok_a), b1 = make(tok_b);
    same += cosine(a1, a2);
    cross += cosine(a1, b1);
  }
  CHECK(same / pairs > cross / pairs);
}

TEST_CASE("layer groups partition all parameters") {
  ModelConfig cfg;
  cfg.vocab_size = 64;
  cfg.num_layers = 4;
  cfg.hidden_dim = 16;
  cfg.num_heads = 2;
  cfg.max_seq_len = 32;
  cfg.ff_dim = 32;
  auto m = Transformer::init(cfg, 3);
  CHECK(cfg.num_groups() == 6);

  size_t covered = 0;
  std::set<std::string> seen;
  for (size_t g = 0; g < cfg.num_groups(); ++g) {
    for (const auto& name : m.layer_parameters(static_cast<int>(g))) {
      CHECK(seen.insert(name).second);  // pairwise disjoint
      ++covered;
    }
  }
  CHECK(covered == m.params().size());

  auto group0 = m.layer_parameters(0);
  CHECK(group0 == std::vector<std::string>{"embed.pos", "embed.tok"});
  auto head = m.layer_parameters(static_cast<int>(cfg.num_layers) + 1);
  CHECK(head == std::vector<std::string>{"final.ln.bias", "final.ln.gain", "head.bias",
                                         "head.proj"});
  CHECK_THROWS_AS((void)m.layer_parameters(static_cast<int>(cfg.num_groups())),
                  std::invalid_argument);
}

TEST_CASE("checkpoint round-trips bit-exactly including metadata") {
  auto cfg = tiny_config();
  auto m = Transformer::init(cfg, 77);
  Checkpoint ckpt{cfg, m.params(), {"ck-1", "stage-a", 120, 77, "parent-0"}};
  const std::string path = temp_path("mdpt_ckpt_roundtrip.bin");
  model::save_checkpoint(ckpt, path);
  auto loaded = model::load_checkpoint(path);
  CHECK(loaded == ckpt);
  std::filesystem::remove(path);
}

TEST_CASE("truncated checkpoint file raises a corrupt-checkpoint error") {
  auto cfg = tiny_config();
  auto m = Transformer::init(cfg, 78);
  Checkpoint ckpt{cfg, m.params(), {"ck-2", "stage-a", 1, 78, ""}};
  const std::string path = temp_path("mdpt_ckpt_trunc.bin");
  model::save_checkpoint(ckpt, path);
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size / 2);
  CHECK_THROWS_AS((void)model::load_checkpoint(path), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("load then continue training reproduces the loss curve") {
  auto cfg = tiny_config();
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int32_t> tok(data::kFirstByteToken, 30);
  std::vector<data::Segment> corpus;
  for (int i = 0; i < 6; ++i) {
    std::vector<int32_t> content(12);
    for (auto& t : content) t = tok(rng);
    corpus.push_back(make_segment(content));
  }
  auto train_losses = [&](Transformer& m, int steps, uint64_t seed) {
    auto opt = numcore::Optimizer::uniform(numcore::OptimizerConfig{}, 1e-3);
    std::vector<double> losses;
    for (int step = 0; step < steps; ++step) {
      auto batch = masked_from(corpus, static_cast<int32_t>(cfg.vocab_size),
                               seed + static_cast<uint64_t>(step));
      numcore::Tape tape;
      auto out = m.mlm_forward(tape, batch);
      losses.push_back(tape.scalar(out.loss));
      opt.step(m.params(), tape.backprop(out.loss));
    }
    return losses;
  };

  auto m1 = Transformer::init(cfg, 55);
  const std::string path = temp_path("mdpt_ckpt_resume.bin");
  model::save_checkpoint(Checkpoint{cfg, m1.params(), {"ck", "s", 0, 55, ""}}, path);
  auto direct = train_losses(m1, 20, 900);

  auto loaded = model::load_checkpoint(path);
  Transformer m2(loaded.config, loaded.params);
  auto resumed = train_losses(m2, 20, 900);
  CHECK(direct == resumed);
  std::filesystem::remove(path);
}
