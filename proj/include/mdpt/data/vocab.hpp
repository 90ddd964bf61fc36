#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mdpt::data {

// Byte-level vocabulary: three reserved ids followed by raw byte values.
constexpr int32_t kPadToken = 0;
constexpr int32_t kBosToken = 1;   // <s>, prefixes every segment
constexpr int32_t kMaskToken = 2;
constexpr int32_t kFirstByteToken = 3;
constexpr int32_t kByteVocabSize = kFirstByteToken + 256;

inline bool is_special_token(int32_t id) { return id < kFirstByteToken; }

inline std::vector<int32_t> tokenize_bytes(std::string_view text) {
  std::vector<int32_t> out;
  out.reserve(text.size());
  for (unsigned char c : text) out.push_back(kFirstByteToken + static_cast<int32_t>(c));
  return out;
}

inline std::string detokenize_bytes(const std::vector<int32_t>& ids) {
  std::string out;
  for (int32_t id : ids)
    if (id >= kFirstByteToken) out.push_back(static_cast<char>(id - kFirstByteToken));
  return out;
}

}  // namespace mdpt::data
