#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mdpt/data/corpus.hpp"

namespace mdpt::data {

struct ReplayEntry {
  Segment segment;
  std::string source_domain;
  size_t source_index = 0;    // index into the source segment list
  std::string strategy;       // which selection strategy chose it
};

// Fixed-size store of source-domain segments mixed into each batch at a
// configured ratio. Contents are immutable once built for a stage.
class ReplayBuffer {
 public:
  ReplayBuffer(std::vector<ReplayEntry> entries, size_t capacity, double ratio);

  static ReplayBuffer build(const std::vector<Segment>& segments,
                            const std::vector<size_t>& selected_indices, size_t capacity,
                            double ratio, const std::string& source_domain,
                            const std::string& strategy);

  size_t size() const { return entries_.size(); }
  size_t capacity() const { return capacity_; }
  double ratio() const { return ratio_; }
  const std::vector<ReplayEntry>& entries() const { return entries_; }
  const Segment& segment(size_t i) const { return entries_.at(i).segment; }
  uint64_t content_hash() const;

  void write_manifest(const std::string& path) const;

 private:
  std::vector<ReplayEntry> entries_;
  size_t capacity_ = 0;
  double ratio_ = 0.0;
};

// Deterministic epoch-shuffled cycle over a segment list.
class SegmentStream {
 public:
  SegmentStream(const std::vector<Segment>* segments, uint64_t seed);
  const Segment& next();
  size_t size() const { return segments_->size(); }

 private:
  void reshuffle();
  const std::vector<Segment>* segments_;
  std::vector<size_t> order_;
  size_t pos_ = 0;
  uint64_t epoch_ = 0;
  uint64_t seed_ = 0;
};

struct MixedBatch {
  std::vector<Segment> segments;
  size_t replay_count = 0;
};

// round(ratio*batch_size) segments drawn uniformly with replacement from the
// buffer, the remainder from the current-domain stream, order shuffled.
MixedBatch mix_batch(SegmentStream& current, const ReplayBuffer& buffer, size_t batch_size,
                     std::mt19937_64& rng);

}  // namespace mdpt::data
