#include "mdpt/mitigation/fisher.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mdpt::mitigation {

using numcore::GradientMap;
using numcore::Tensor;

void FisherDiagonal::validate_against(const numcore::ParameterSet& params) const {
  if (values.size() != params.size())
    throw std::invalid_argument("FisherDiagonal: parameter count mismatch");
  for (const auto& [name, t] : params) {
    auto it = values.find(name);
    if (it == values.end())
      throw std::invalid_argument("FisherDiagonal: missing entry for " + name);
    if (!it->second.same_shape(t))
      throw std::invalid_argument("FisherDiagonal: shape mismatch for " + name);
  }
}

FisherDiagonal fisher_from_grads(const std::vector<GradientMap>& per_sample,
                                 const std::string& anchor_id) {
  if (per_sample.empty()) throw std::invalid_argument("fisher: no samples");
  FisherDiagonal out;
  out.anchor_id = anchor_id;
  out.sample_count = per_sample.size();
  for (const auto& grads : per_sample) {
    for (const auto& [name, g] : grads) {
      Tensor& acc = out.values[name];
      if (acc.size() == 0) acc = Tensor(g.shape());
      if (!acc.same_shape(g))
        throw std::invalid_argument("fisher: inconsistent gradient shape for " + name);
      for (size_t i = 0; i < g.size(); ++i) acc[i] += g[i] * g[i];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(per_sample.size());
  for (auto& [name, t] : out.values)
    for (double& v : t.values()) v *= inv_n;
  return out;
}

FisherDiagonal fisher_diagonal(const model::Transformer& model,
                               const std::vector<data::MaskedBatch>& samples,
                               const std::string& anchor_id) {
  if (samples.empty()) throw std::invalid_argument("fisher_diagonal: empty sample list");
  std::vector<GradientMap> per_sample;
  per_sample.reserve(samples.size());
  for (const auto& batch : samples) {
    if (batch.batch != 1)
      throw std::invalid_argument("fisher_diagonal: samples must be single-segment batches");
    numcore::Tape tape;
    auto out = model.mlm_forward(tape, batch);
    per_sample.push_back(tape.backprop(out.loss));
  }
  return fisher_from_grads(per_sample, anchor_id);
}

namespace {
constexpr char kMagic[8] = {'M', 'D', 'P', 'T', 'B', 'L', 'O', 'B'};
constexpr uint32_t kVersion = 1;
}  // namespace

void save_fisher(const FisherDiagonal& fisher, const std::string& path) {
  nlohmann::json header;
  header["role"] = "fisher";
  header["meta"] = {{"anchor_id", fisher.anchor_id}, {"sample_count", fisher.sample_count}};
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& [name, t] : fisher.values)
    tensors.push_back({{"name", name}, {"shape", t.shape()}});
  header["tensors"] = tensors;
  const std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write fisher file: " + path);
  out.write(kMagic, sizeof(kMagic));
  uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& [name, t] : fisher.values)
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!out) throw std::runtime_error("fisher write failed: " + path);
}

FisherDiagonal load_fisher(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open fisher file: " + path);
  auto need = [&](void* p, size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in.gcount()) != n)
      throw std::runtime_error("corrupt fisher file (truncated): " + path);
  };
  char magic[8];
  need(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("corrupt fisher file (bad magic): " + path);
  uint32_t version = 0;
  need(&version, sizeof(version));
  if (version != kVersion) throw std::runtime_error("fisher version mismatch: " + path);
  uint64_t hlen = 0;
  need(&hlen, sizeof(hlen));
  std::string hs(hlen, '\0');
  need(hs.data(), hlen);
  nlohmann::json header = nlohmann::json::parse(hs);
  if (header.at("role").get<std::string>() != "fisher")
    throw std::runtime_error("not a fisher container: " + path);

  FisherDiagonal f;
  f.anchor_id = header.at("meta").at("anchor_id").get<std::string>();
  f.sample_count = header.at("meta").at("sample_count").get<size_t>();
  for (const auto& entry : header.at("tensors")) {
    std::string name = entry.at("name").get<std::string>();
    std::vector<size_t> shape = entry.at("shape").get<std::vector<size_t>>();
    Tensor t(shape);
    need(t.data(), t.size() * sizeof(double));
    f.values.emplace(std::move(name), std::move(t));
  }
  return f;
}

}  // namespace mdpt::mitigation
