#include "mdpt/model/checkpoint.hpp"

#include <json.hpp>

#include "mdpt/model/transformer.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mdpt::model {

using nlohmann::json;
using numcore::Tensor;

namespace {

constexpr char kMagic[8] = {'M', 'D', 'P', 'T', 'B', 'L', 'O', 'B'};
constexpr uint32_t kVersion = 1;

json config_to_json(const ModelConfig& c) {
  return json{{"vocab_size", c.vocab_size},   {"num_layers", c.num_layers},
              {"hidden_dim", c.hidden_dim},   {"num_heads", c.num_heads},
              {"max_seq_len", c.max_seq_len}, {"ff_dim", c.ff_dim}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<size_t>();
  c.num_layers = j.at("num_layers").get<size_t>();
  c.hidden_dim = j.at("hidden_dim").get<size_t>();
  c.num_heads = j.at("num_heads").get<size_t>();
  c.max_seq_len = j.at("max_seq_len").get<size_t>();
  c.ff_dim = j.at("ff_dim").get<size_t>();
  return c;
}

void write_raw(std::ofstream& out, const void* p, size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_raw(std::ifstream& in, void* p, size_t n, const std::string& path) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n)
    throw std::runtime_error("corrupt checkpoint (truncated): " + path);
}

}  // namespace

bool Checkpoint::operator==(const Checkpoint& o) const {
  if (!(config == o.config) || !(meta == o.meta) || params.size() != o.params.size())
    return false;
  for (const auto& [name, t] : params) {
    auto it = o.params.find(name);
    if (it == o.params.end() || !t.same_shape(it->second)) return false;
    if (std::memcmp(t.data(), it->second.data(), t.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  json header;
  header["role"] = "checkpoint";
  header["config"] = config_to_json(ckpt.config);
  header["meta"] = {{"id", ckpt.meta.id},
                    {"stage", ckpt.meta.stage},
                    {"step_count", ckpt.meta.step_count},
                    {"seed", ckpt.meta.seed},
                    {"parent_id", ckpt.meta.parent_id}};
  json tensors = json::array();
  for (const auto& [name, t] : ckpt.params)
    tensors.push_back(json{{"name", name}, {"shape", t.shape()}});
  header["tensors"] = tensors;
  const std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  write_raw(out, kMagic, sizeof(kMagic));
  uint32_t version = kVersion;
  write_raw(out, &version, sizeof(version));
  uint64_t hlen = hs.size();
  write_raw(out, &hlen, sizeof(hlen));
  write_raw(out, hs.data(), hs.size());
  for (const auto& [name, t] : ckpt.params)
    write_raw(out, t.data(), t.size() * sizeof(double));
  out.flush();
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  read_raw(in, magic, sizeof(magic), path);
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("corrupt checkpoint (bad magic): " + path);
  uint32_t version = 0;
  read_raw(in, &version, sizeof(version), path);
  if (version != kVersion)
    throw std::runtime_error("checkpoint version mismatch in " + path + ": got " +
                             std::to_string(version));
  uint64_t hlen = 0;
  read_raw(in, &hlen, sizeof(hlen), path);
  std::string hs(hlen, '\0');
  read_raw(in, hs.data(), hlen, path);
  json header;
  try {
    header = json::parse(hs);
  } catch (const json::exception& e) {
    throw std::runtime_error("corrupt checkpoint (bad header): " + path + ": " + e.what());
  }

  Checkpoint ckpt;
  ckpt.config = config_from_json(header.at("config"));
  const json& meta = header.at("meta");
  ckpt.meta.id = meta.at("id").get<std::string>();
  ckpt.meta.stage = meta.at("stage").get<std::string>();
  ckpt.meta.step_count = meta.at("step_count").get<uint64_t>();
  ckpt.meta.seed = meta.at("seed").get<uint64_t>();
  ckpt.meta.parent_id = meta.at("parent_id").get<std::string>();

  for (const auto& entry : header.at("tensors")) {
    std::string name = entry.at("name").get<std::string>();
    std::vector<size_t> shape = entry.at("shape").get<std::vector<size_t>>();
    Tensor t(shape);
    read_raw(in, t.data(), t.size() * sizeof(double), path);
    ckpt.params.emplace(std::move(name), std::move(t));
  }
  numcore::ParameterSet expected = Transformer::init_params(ckpt.config, 0);
  if (expected.size() != ckpt.params.size())
    throw std::runtime_error("checkpoint " + path + ": parameter set does not match config");
  for (const auto& [name, t] : expected) {
    auto it = ckpt.params.find(name);
    if (it == ckpt.params.end() || !it->second.same_shape(t))
      throw std::runtime_error("checkpoint " + path + ": shape mismatch for parameter " + name);
  }
  return ckpt;
}

uint64_t params_hash(const numcore::ParameterSet& params) {
  uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& [name, t] : params) {
    mix(name.data(), name.size());
    for (size_t d : t.shape()) mix(&d, sizeof(d));
    mix(t.data(), t.size() * sizeof(double));
  }
  return h;
}

}  // namespace mdpt::model
