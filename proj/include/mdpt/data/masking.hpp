#pragma once

#include <cstdint>
#include <vector>

#include "mdpt/data/corpus.hpp"

namespace mdpt::data {

// A batch with MLM corruptions applied. Rows are padded to the longest
// segment in the batch; target ids are defined only where target_mask is set.
struct MaskedBatch {
  size_t batch = 0;
  size_t seq = 0;
  std::vector<int32_t> input_ids;    // batch*seq, corrupted
  std::vector<int32_t> target_ids;   // batch*seq, original ids at target positions
  std::vector<uint8_t> target_mask;  // 1 where a prediction target exists
  std::vector<uint8_t> key_valid;    // 1 at non-padding positions
  uint64_t seed = 0;

  size_t target_count() const;
};

struct MaskingConfig {
  double rate = 0.15;
  // Of the selected positions: mask / random / keep.
  double mask_prob = 0.8;
  double random_prob = 0.1;
  int32_t vocab_size = 0;  // random replacement draws from [kFirstByteToken, vocab_size)
};

// Selects each non-special position independently with probability rate and
// applies 80/10/10 mask/random/keep corruption. The <s> position and padding
// are never selected. If a draw selects zero targets the batch is resampled
// once with a derived seed, then an error is raised.
MaskedBatch mask_batch(const std::vector<Segment>& segments, const MaskingConfig& cfg,
                       uint64_t seed);

}  // namespace mdpt::data
