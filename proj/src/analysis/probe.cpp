#include "mdpt/analysis/probe.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "mdpt/data/vocab.hpp"
#include "mdpt/model/transformer.hpp"

namespace mdpt::analysis {

void ProbeDataset::validate() const {
  auto check = [](const auto& toks, const auto& tags, const char* split) {
    if (toks.size() != tags.size())
      throw std::invalid_argument(std::string("ProbeDataset: ") + split +
                                  " tokens/tags count mismatch");
    for (size_t i = 0; i < toks.size(); ++i)
      if (toks[i].size() != tags[i].size())
        throw std::invalid_argument(std::string("ProbeDataset: ") + split +
                                    " sequence/tag length mismatch");
  };
  check(train_tokens, train_tags, "train");
  check(test_tokens, test_tags, "test");
  if (train_tokens.empty() || test_tokens.empty())
    throw std::invalid_argument("ProbeDataset: needs both train and test sequences");
}

namespace {

struct TokenFeatures {
  std::vector<std::vector<double>> x;
  std::vector<uint8_t> y;
};

TokenFeatures extract(const model::Transformer& m, size_t layer,
                      const std::vector<std::vector<int32_t>>& tokens,
                      const std::vector<std::vector<uint8_t>>& tags) {
  TokenFeatures f;
  for (size_t s = 0; s < tokens.size(); ++s) {
    auto states = m.hidden_states(tokens[s], layer);
    for (size_t t = 0; t < tokens[s].size(); ++t) {
      if (data::is_special_token(tokens[s][t])) continue;
      f.x.push_back(std::move(states[t]));
      f.y.push_back(tags[s][t]);
    }
  }
  return f;
}

double micro_f1(const std::vector<uint8_t>& gold, const std::vector<uint8_t>& pred) {
  size_t tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < gold.size(); ++i) {
    if (pred[i] && gold[i]) ++tp;
    else if (pred[i] && !gold[i]) ++fp;
    else if (!pred[i] && gold[i]) ++fn;
  }
  const size_t denom = 2 * tp + fp + fn;
  if (denom == 0) return 1.0;  // no positives anywhere: vacuously perfect
  return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace

ProbeResult probe_layer(const model::Checkpoint& ckpt, size_t layer,
                        const ProbeDataset& dataset, const std::string& task_name,
                        uint64_t seed, const ProbeConfig& cfg) {
  dataset.validate();
  if (layer > ckpt.config.num_layers)
    throw std::invalid_argument("probe_layer: layer index out of range");
  model::Transformer m(ckpt.config, ckpt.params);

  TokenFeatures train = extract(m, layer, dataset.train_tokens, dataset.train_tags);
  TokenFeatures test = extract(m, layer, dataset.test_tokens, dataset.test_tags);
  if (train.x.empty() || test.x.empty())
    throw std::invalid_argument("probe_layer: no content tokens in probe data");
  const size_t H = train.x[0].size();

  // Two-class softmax regression on frozen features, minibatch SGD.
  std::vector<double> w0(H, 0.0), w1(H, 0.0);
  double b0 = 0.0, b1 = 0.0;
  std::vector<size_t> order(train.x.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  constexpr size_t kBatch = 32;

  for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t off = 0; off < order.size(); off += kBatch) {
      const size_t end = std::min(off + kBatch, order.size());
      std::vector<double> g0(H, 0.0), g1(H, 0.0);
      double gb0 = 0.0, gb1 = 0.0;
      for (size_t i = off; i < end; ++i) {
        const auto& x = train.x[order[i]];
        const int y = train.y[order[i]];
        double z0 = b0, z1 = b1;
        for (size_t j = 0; j < H; ++j) {
          z0 += w0[j] * x[j];
          z1 += w1[j] * x[j];
        }
        const double mx = std::max(z0, z1);
        const double e0 = std::exp(z0 - mx), e1 = std::exp(z1 - mx);
        const double p1 = e1 / (e0 + e1);
        const double d1 = p1 - static_cast<double>(y);  // dL/dz1; dL/dz0 = -d1
        for (size_t j = 0; j < H; ++j) {
          g1[j] += d1 * x[j];
          g0[j] -= d1 * x[j];
        }
        gb1 += d1;
        gb0 -= d1;
      }
      const double scale = cfg.lr / static_cast<double>(end - off);
      for (size_t j = 0; j < H; ++j) {
        w0[j] -= scale * g0[j];
        w1[j] -= scale * g1[j];
      }
      b0 -= scale * gb0;
      b1 -= scale * gb1;
    }
    for (size_t j = 0; j < H; ++j)
      if (!std::isfinite(w0[j]) || !std::isfinite(w1[j]))
        throw std::runtime_error("probe_layer: probe training diverged (non-finite weights)");
  }

  std::vector<uint8_t> pred(test.x.size(), 0);
  for (size_t i = 0; i < test.x.size(); ++i) {
    const auto& x = test.x[i];
    double z0 = b0, z1 = b1;
    for (size_t j = 0; j < H; ++j) {
      z0 += w0[j] * x[j];
      z1 += w1[j] * x[j];
    }
    pred[i] = z1 > z0 ? 1 : 0;
  }

  ProbeResult result;
  result.layer = layer;
  result.task = task_name;
  result.metric = micro_f1(test.y, pred);
  result.config = cfg;
  return result;
}

ProbeDataset load_probe_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read probe dataset: " + path);
  nlohmann::json j;
  in >> j;
  ProbeDataset d;
  auto fill = [](const nlohmann::json& arr, auto& tokens, auto& tags) {
    for (const auto& item : arr) {
      tokens.push_back(item.at("tokens").get<std::vector<int32_t>>());
      tags.push_back(item.at("tags").get<std::vector<uint8_t>>());
    }
  };
  fill(j.at("train"), d.train_tokens, d.train_tags);
  fill(j.at("test"), d.test_tokens, d.test_tags);
  d.validate();
  return d;
}

void save_probe_dataset(const ProbeDataset& dataset, const std::string& path) {
  nlohmann::json j;
  auto dump = [](const auto& tokens, const auto& tags) {
    nlohmann::json arr = nlohmann::json::array();
    for (size_t i = 0; i < tokens.size(); ++i)
      arr.push_back({{"tokens", tokens[i]}, {"tags", tags[i]}});
    return arr;
  };
  j["train"] = dump(dataset.train_tokens, dataset.train_tags);
  j["test"] = dump(dataset.test_tokens, dataset.test_tags);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write probe dataset: " + path);
  out << j.dump() << "\n";
}

}  // namespace mdpt::analysis
