#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mdpt::data {

struct Document {
  std::vector<int32_t> tokens;
};

struct Corpus {
  std::string domain;
  std::vector<Document> docs;
  std::string provenance;  // source path

  size_t total_tokens() const;
};

struct CorpusSplits {
  Corpus train;
  Corpus valid;
  Corpus test;
};

// A fixed-length contiguous token window from one document, prefixed with
// <s>; the unit of selection and training.
struct Segment {
  int32_t doc_id = -1;
  size_t offset = 0;            // token offset inside the source document
  std::vector<int32_t> tokens;  // [<s>, t0, t1, ...]
};

// Reads blank-line-separated UTF-8 documents, byte-tokenizes them, and splits
// 8:1:1 at the document level after a seeded shuffle. Requires >= 10
// documents so every split is non-empty.
CorpusSplits ingest(const std::string& path, const std::string& domain, uint64_t seed);

// Split already-tokenized documents (used by synthetic generators and tests).
CorpusSplits split_documents(std::vector<Document> docs, const std::string& domain,
                             const std::string& provenance, uint64_t seed);

std::vector<Document> parse_documents(const std::string& text);

// Non-overlapping windows of `length` tokens per document; a trailing partial
// window is kept only if it has at least 8 tokens.
std::vector<Segment> segment_corpus(const Corpus& corpus, size_t length);

constexpr size_t kMinTailSegmentTokens = 8;
constexpr size_t kMinIngestDocuments = 10;

}  // namespace mdpt::data
