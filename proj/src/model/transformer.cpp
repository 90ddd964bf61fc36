#include "mdpt/model/transformer.hpp"

#include <random>
#include <stdexcept>

#include "mdpt/data/vocab.hpp"

namespace mdpt::model {

using numcore::ParameterSet;
using numcore::Tape;
using numcore::Tensor;
using numcore::Value;

void ModelConfig::validate() const {
  if (num_layers < 1) throw std::invalid_argument("ModelConfig: num_layers must be >= 1");
  if (num_heads == 0 || hidden_dim % num_heads != 0)
    throw std::invalid_argument("ModelConfig: hidden_dim must be divisible by num_heads");
  if (vocab_size <= static_cast<size_t>(data::kFirstByteToken))
    throw std::invalid_argument("ModelConfig: vocab_size too small for special tokens");
  if (max_seq_len < 2) throw std::invalid_argument("ModelConfig: max_seq_len must be >= 2");
  if (ff_dim == 0) throw std::invalid_argument("ModelConfig: ff_dim must be positive");
}

Pooling parse_pooling(const std::string& s) {
  if (s == "cls") return Pooling::kCls;
  if (s == "avg") return Pooling::kAvg;
  throw std::invalid_argument("unknown pooling mode: " + s);
}

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInitStd = 0.02;

std::string layer_prefix(size_t i) { return "layer." + std::to_string(i) + "."; }

Tensor normal_tensor(std::vector<size_t> shape, std::mt19937_64& rng, double std_dev) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, std_dev);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace

ParameterSet Transformer::init_params(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ParameterSet p;
  const size_t H = cfg.hidden_dim, F = cfg.ff_dim, V = cfg.vocab_size, S = cfg.max_seq_len;
  p["embed.tok"] = normal_tensor({V, H}, rng, kInitStd);
  p["embed.pos"] = normal_tensor({S, H}, rng, kInitStd);
  for (size_t i = 0; i < cfg.num_layers; ++i) {
    const std::string lp = layer_prefix(i);
    p[lp + "ln1.gain"] = Tensor::full({H}, 1.0);
    p[lp + "ln1.bias"] = Tensor({H});
    for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"})
      p[lp + w] = normal_tensor({H, H}, rng, kInitStd);
    for (const char* b : {"attn.bq", "attn.bk", "attn.bv", "attn.bo"}) p[lp + b] = Tensor({H});
    p[lp + "ln2.gain"] = Tensor::full({H}, 1.0);
    p[lp + "ln2.bias"] = Tensor({H});
    p[lp + "ff.w1"] = normal_tensor({H, F}, rng, kInitStd);
    p[lp + "ff.b1"] = Tensor({F});
    p[lp + "ff.w2"] = normal_tensor({F, H}, rng, kInitStd);
    p[lp + "ff.b2"] = Tensor({H});
  }
  p["final.ln.gain"] = Tensor::full({H}, 1.0);
  p["final.ln.bias"] = Tensor({H});
  p["head.proj"] = normal_tensor({H, V}, rng, kInitStd);
  p["head.bias"] = Tensor({V});
  return p;
}

Transformer::Transformer(ModelConfig cfg, ParameterSet params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  ParameterSet expected = init_params(cfg_, 0);
  if (expected.size() != params_.size())
    throw std::invalid_argument("Transformer: parameter count does not match config");
  for (const auto& [name, t] : expected) {
    auto it = params_.find(name);
    if (it == params_.end())
      throw std::invalid_argument("Transformer: missing parameter " + name);
    if (!it->second.same_shape(t))
      throw std::invalid_argument("Transformer: shape mismatch for " + name);
  }
}

Transformer Transformer::init(const ModelConfig& cfg, uint64_t seed) {
  return Transformer(cfg, init_params(cfg, seed));
}

int Transformer::group_of_name(const std::string& name, size_t num_layers) {
  if (name.rfind("embed.", 0) == 0) return 0;
  if (name.rfind("layer.", 0) == 0) {
    size_t dot = name.find('.', 6);
    if (dot != std::string::npos) {
      size_t idx = std::stoul(name.substr(6, dot - 6));
      if (idx < num_layers) return static_cast<int>(idx) + 1;
    }
  }
  if (name.rfind("final.ln.", 0) == 0 || name.rfind("head.", 0) == 0)
    return static_cast<int>(num_layers) + 1;
  throw std::invalid_argument("Transformer: parameter " + name + " has no layer group");
}

int Transformer::group_of(const std::string& name) const {
  return group_of_name(name, cfg_.num_layers);
}

std::vector<std::string> Transformer::layer_parameters(int group) const {
  if (group < 0 || static_cast<size_t>(group) >= cfg_.num_groups())
    throw std::invalid_argument("layer_parameters: group " + std::to_string(group) +
                                " out of range");
  std::vector<std::string> names;
  for (const auto& [name, t] : params_)
    if (group_of(name) == group) names.push_back(name);
  return names;
}

std::map<std::string, int> Transformer::group_map() const {
  std::map<std::string, int> m;
  for (const auto& [name, t] : params_) m[name] = group_of(name);
  return m;
}

std::vector<Value> Transformer::encoder_states(Tape& tape, const std::vector<int32_t>& ids,
                                               size_t batch, size_t seq,
                                               const std::vector<uint8_t>& key_valid) const {
  if (seq > cfg_.max_seq_len)
    throw std::invalid_argument("encoder: sequence length " + std::to_string(seq) +
                                " exceeds max " + std::to_string(cfg_.max_seq_len));
  if (ids.size() != batch * seq || key_valid.size() != batch * seq)
    throw std::invalid_argument("encoder: ids/key_valid size mismatch");
  for (int32_t id : ids)
    if (id < 0 || static_cast<size_t>(id) >= cfg_.vocab_size)
      throw std::invalid_argument("encoder: token id " + std::to_string(id) +
                                  " outside vocab of " + std::to_string(cfg_.vocab_size));

  auto P = [&](const std::string& name) -> Value {
    return tape.param(name, params_.at(name));
  };

  std::vector<int32_t> pos_ids(batch * seq);
  for (size_t b = 0; b < batch; ++b)
    for (size_t s = 0; s < seq; ++s) pos_ids[b * seq + s] = static_cast<int32_t>(s);

  Value tok = tape.gather_rows(P("embed.tok"), ids);
  Value pos = tape.gather_rows(P("embed.pos"), pos_ids);
  Value x = tape.add(tok, pos);

  std::vector<Value> states;
  states.reserve(cfg_.num_layers + 1);
  states.push_back(x);

  numcore::AttentionShape att{batch, seq, cfg_.num_heads};
  for (size_t i = 0; i < cfg_.num_layers; ++i) {
    const std::string lp = layer_prefix(i);
    Value h = tape.layer_norm(x, P(lp + "ln1.gain"), P(lp + "ln1.bias"), kLnEps);
    Value q = tape.add_bias(tape.matmul(h, P(lp + "attn.wq")), P(lp + "attn.bq"));
    Value k = tape.add_bias(tape.matmul(h, P(lp + "attn.wk")), P(lp + "attn.bk"));
    Value v = tape.add_bias(tape.matmul(h, P(lp + "attn.wv")), P(lp + "attn.bv"));
    Value a = tape.attention(q, k, v, att, key_valid);
    Value proj = tape.add_bias(tape.matmul(a, P(lp + "attn.wo")), P(lp + "attn.bo"));
    x = tape.add(x, proj);
    Value h2 = tape.layer_norm(x, P(lp + "ln2.gain"), P(lp + "ln2.bias"), kLnEps);
    Value f1 = tape.gelu(tape.add_bias(tape.matmul(h2, P(lp + "ff.w1")), P(lp + "ff.b1")));
    Value f2 = tape.add_bias(tape.matmul(f1, P(lp + "ff.w2")), P(lp + "ff.b2"));
    x = tape.add(x, f2);
    states.push_back(x);
  }
  return states;
}

MlmOutput Transformer::mlm_forward(Tape& tape, const data::MaskedBatch& batch) const {
  if (batch.target_count() == 0)
    throw std::invalid_argument("mlm_forward: batch has no prediction targets");
  auto states = encoder_states(tape, batch.input_ids, batch.batch, batch.seq, batch.key_valid);
  Value hn = tape.layer_norm(states.back(), tape.param("final.ln.gain", params_.at("final.ln.gain")),
                             tape.param("final.ln.bias", params_.at("final.ln.bias")), kLnEps);
  Value logits = tape.add_bias(tape.matmul(hn, tape.param("head.proj", params_.at("head.proj"))),
                               tape.param("head.bias", params_.at("head.bias")));
  std::vector<int32_t> targets;
  std::vector<size_t> rows;
  for (size_t i = 0; i < batch.target_mask.size(); ++i) {
    if (batch.target_mask[i]) {
      rows.push_back(i);
      targets.push_back(batch.target_ids[i]);
    }
  }
  Value loss = tape.masked_cross_entropy(logits, std::move(targets), std::move(rows));
  return MlmOutput{loss, logits};
}

std::vector<double> Transformer::encode(const data::Segment& segment, Pooling pooling) const {
  if (segment.tokens.empty() || segment.tokens[0] != data::kBosToken)
    throw std::invalid_argument("encode: segment must begin with <s>");
  Tape tape;
  const size_t seq = segment.tokens.size();
  std::vector<uint8_t> key_valid(seq, 1);
  auto states = encoder_states(tape, segment.tokens, 1, seq, key_valid);
  const Tensor& last = tape.value(states.back());
  const size_t H = cfg_.hidden_dim;
  std::vector<double> out(H, 0.0);
  if (pooling == Pooling::kCls) {
    for (size_t j = 0; j < H; ++j) out[j] = last[j];
    return out;
  }
  for (size_t i = 0; i < seq; ++i)
    for (size_t j = 0; j < H; ++j) out[j] += last[i * H + j];
  for (size_t j = 0; j < H; ++j) out[j] /= static_cast<double>(seq);
  return out;
}

std::vector<std::vector<double>> Transformer::hidden_states(const std::vector<int32_t>& tokens,
                                                            size_t layer) const {
  if (layer > cfg_.num_layers)
    throw std::invalid_argument("hidden_states: layer out of range");
  Tape tape;
  const size_t seq = tokens.size();
  std::vector<uint8_t> key_valid(seq, 1);
  auto states = encoder_states(tape, tokens, 1, seq, key_valid);
  const Tensor& t = tape.value(states[layer]);
  const size_t H = cfg_.hidden_dim;
  std::vector<std::vector<double>> out(seq, std::vector<double>(H));
  for (size_t i = 0; i < seq; ++i)
    for (size_t j = 0; j < H; ++j) out[i][j] = t[i * H + j];
  return out;
}

}  // namespace mdpt::model
