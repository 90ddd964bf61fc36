#include "mdpt/data/replay.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "mdpt/util.hpp"

namespace mdpt::data {

ReplayBuffer::ReplayBuffer(std::vector<ReplayEntry> entries, size_t capacity, double ratio)
    : entries_(std::move(entries)), capacity_(capacity), ratio_(ratio) {
  if (entries_.empty()) throw std::invalid_argument("ReplayBuffer: empty selection");
  if (entries_.size() > capacity_)
    throw std::invalid_argument("ReplayBuffer: " + std::to_string(entries_.size()) +
                                " segments exceed capacity " + std::to_string(capacity_));
  if (ratio_ < 0.0 || ratio_ > 1.0)
    throw std::invalid_argument("ReplayBuffer: ratio must be in [0,1]");
}

ReplayBuffer ReplayBuffer::build(const std::vector<Segment>& segments,
                                 const std::vector<size_t>& selected, size_t capacity,
                                 double ratio, const std::string& source_domain,
                                 const std::string& strategy) {
  std::set<size_t> seen;
  std::vector<ReplayEntry> entries;
  entries.reserve(selected.size());
  for (size_t idx : selected) {
    if (idx >= segments.size())
      throw std::invalid_argument("ReplayBuffer: index " + std::to_string(idx) +
                                  " out of range");
    if (!seen.insert(idx).second)
      throw std::invalid_argument("ReplayBuffer: duplicate index " + std::to_string(idx));
    entries.push_back(ReplayEntry{segments[idx], source_domain, idx, strategy});
  }
  return ReplayBuffer(std::move(entries), capacity, ratio);
}

uint64_t ReplayBuffer::content_hash() const {
  uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& e : entries_) {
    mix(e.segment.tokens.data(), e.segment.tokens.size() * sizeof(int32_t));
    mix(&e.segment.doc_id, sizeof(e.segment.doc_id));
    mix(&e.segment.offset, sizeof(e.segment.offset));
  }
  return h;
}

void ReplayBuffer::write_manifest(const std::string& path) const {
  nlohmann::json j;
  j["capacity"] = capacity_;
  j["ratio"] = ratio_;
  j["size"] = entries_.size();
  nlohmann::json items = nlohmann::json::array();
  for (const auto& e : entries_) {
    items.push_back({{"domain", e.source_domain},
                     {"segment_index", e.source_index},
                     {"doc_id", e.segment.doc_id},
                     {"offset", e.segment.offset},
                     {"strategy", e.strategy}});
  }
  j["segments"] = items;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write buffer manifest: " + path);
  out << j.dump(2) << "\n";
}

SegmentStream::SegmentStream(const std::vector<Segment>* segments, uint64_t seed)
    : segments_(segments), seed_(seed) {
  if (segments_ == nullptr || segments_->empty())
    throw std::invalid_argument("SegmentStream: empty segment list");
  reshuffle();
}

void SegmentStream::reshuffle() {
  order_.resize(segments_->size());
  for (size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  std::mt19937_64 rng(derive_seed(seed_, epoch_));
  std::shuffle(order_.begin(), order_.end(), rng);
  pos_ = 0;
}

const Segment& SegmentStream::next() {
  if (pos_ >= order_.size()) {
    ++epoch_;
    reshuffle();
  }
  return (*segments_)[order_[pos_++]];
}

MixedBatch mix_batch(SegmentStream& current, const ReplayBuffer& buffer, size_t batch_size,
                     std::mt19937_64& rng) {
  if (batch_size == 0) throw std::invalid_argument("mix_batch: batch_size must be positive");
  const double r = buffer.ratio();
  if (r > 0.0 && buffer.size() == 0)
    throw std::invalid_argument("mix_batch: nonzero ratio with empty buffer");
  size_t n_replay = static_cast<size_t>(std::llround(r * static_cast<double>(batch_size)));
  n_replay = std::min(n_replay, batch_size);

  MixedBatch out;
  out.replay_count = n_replay;
  out.segments.reserve(batch_size);
  std::uniform_int_distribution<size_t> pick(0, buffer.size() - 1);
  for (size_t i = 0; i < n_replay; ++i) out.segments.push_back(buffer.segment(pick(rng)));
  for (size_t i = n_replay; i < batch_size; ++i) out.segments.push_back(current.next());
  std::shuffle(out.segments.begin(), out.segments.end(), rng);
  return out;
}

}  // namespace mdpt::data
