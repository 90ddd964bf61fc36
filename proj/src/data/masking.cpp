#include "mdpt/data/masking.hpp"

#include <random>
#include <stdexcept>

#include "mdpt/data/vocab.hpp"
#include "mdpt/util.hpp"

namespace mdpt::data {

size_t MaskedBatch::target_count() const {
  size_t n = 0;
  for (uint8_t m : target_mask) n += m;
  return n;
}

namespace {

MaskedBatch mask_once(const std::vector<Segment>& segments, const MaskingConfig& cfg,
                      uint64_t seed) {
  MaskedBatch out;
  out.batch = segments.size();
  out.seed = seed;
  for (const auto& s : segments) out.seq = std::max(out.seq, s.tokens.size());
  const size_t n = out.batch * out.seq;
  out.input_ids.assign(n, kPadToken);
  out.target_ids.assign(n, kPadToken);
  out.target_mask.assign(n, 0);
  out.key_valid.assign(n, 0);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int32_t> random_token(kFirstByteToken, cfg.vocab_size - 1);

  for (size_t b = 0; b < out.batch; ++b) {
    const auto& toks = segments[b].tokens;
    for (size_t s = 0; s < toks.size(); ++s) {
      const size_t i = b * out.seq + s;
      const int32_t tok = toks[s];
      out.input_ids[i] = tok;
      out.key_valid[i] = 1;
      if (is_special_token(tok)) continue;  // <s> and specials are never corrupted
      if (unit(rng) >= cfg.rate) continue;
      out.target_mask[i] = 1;
      out.target_ids[i] = tok;
      const double c = unit(rng);
      if (c < cfg.mask_prob)
        out.input_ids[i] = kMaskToken;
      else if (c < cfg.mask_prob + cfg.random_prob)
        out.input_ids[i] = random_token(rng);
      // else: keep the original token, still a prediction target
    }
  }
  return out;
}

}  // namespace

MaskedBatch mask_batch(const std::vector<Segment>& segments, const MaskingConfig& cfg,
                       uint64_t seed) {
  if (segments.empty()) throw std::invalid_argument("mask_batch: empty segment list");
  if (!(cfg.rate > 0.0 && cfg.rate < 1.0))
    throw std::invalid_argument("mask_batch: rate must be in (0,1)");
  if (cfg.vocab_size <= kFirstByteToken)
    throw std::invalid_argument("mask_batch: vocab_size must cover the byte range");

  MaskedBatch out = mask_once(segments, cfg, seed);
  if (out.target_count() == 0) out = mask_once(segments, cfg, derive_seed(seed, 1));
  if (out.target_count() == 0)
    throw std::runtime_error("mask_batch: zero prediction targets after one resample");
  return out;
}

}  // namespace mdpt::data
