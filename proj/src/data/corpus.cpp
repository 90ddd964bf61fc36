#include "mdpt/data/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "mdpt/data/vocab.hpp"

namespace mdpt::data {

size_t Corpus::total_tokens() const {
  size_t n = 0;
  for (const auto& d : docs) n += d.tokens.size();
  return n;
}

std::vector<Document> parse_documents(const std::string& text) {
  std::vector<Document> docs;
  std::string current;
  std::istringstream in(text);
  std::string line;
  auto flush = [&]() {
    // Trim the trailing newline so documents do not end with a separator.
    while (!current.empty() && current.back() == '\n') current.pop_back();
    if (!current.empty()) docs.push_back(Document{tokenize_bytes(current)});
    current.clear();
  };
  while (std::getline(in, line)) {
    if (line.empty()) {
      flush();
    } else {
      current += line;
      current += '\n';
    }
  }
  flush();
  return docs;
}

CorpusSplits split_documents(std::vector<Document> docs, const std::string& domain,
                             const std::string& provenance, uint64_t seed) {
  const size_t n = docs.size();
  if (n < kMinIngestDocuments)
    throw std::invalid_argument("ingest: need at least " +
                                std::to_string(kMinIngestDocuments) + " documents, got " +
                                std::to_string(n));
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  // 8:1:1 with integer round-half-up for the two small splits; every split
  // stays non-empty for n >= 10.
  const size_t n_valid = std::max<size_t>(1, (n + 5) / 10);
  const size_t n_test = n_valid;
  const size_t n_train = n - n_valid - n_test;

  CorpusSplits out;
  out.train.domain = out.valid.domain = out.test.domain = domain;
  out.train.provenance = out.valid.provenance = out.test.provenance = provenance;
  for (size_t i = 0; i < n; ++i) {
    Document& d = docs[order[i]];
    if (i < n_train)
      out.train.docs.push_back(std::move(d));
    else if (i < n_train + n_valid)
      out.valid.docs.push_back(std::move(d));
    else
      out.test.docs.push_back(std::move(d));
  }
  return out;
}

CorpusSplits ingest(const std::string& path, const std::string& domain, uint64_t seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("ingest: cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return split_documents(parse_documents(buf.str()), domain, path, seed);
}

std::vector<Segment> segment_corpus(const Corpus& corpus, size_t length) {
  if (length < 2) throw std::invalid_argument("segment: length must be >= 2");
  std::vector<Segment> segments;
  for (size_t d = 0; d < corpus.docs.size(); ++d) {
    const auto& toks = corpus.docs[d].tokens;
    for (size_t off = 0; off < toks.size(); off += length) {
      const size_t len = std::min(length, toks.size() - off);
      if (len < length && len < kMinTailSegmentTokens) break;
      Segment s;
      s.doc_id = static_cast<int32_t>(d);
      s.offset = off;
      s.tokens.reserve(len + 1);
      s.tokens.push_back(kBosToken);
      s.tokens.insert(s.tokens.end(), toks.begin() + static_cast<ptrdiff_t>(off),
                      toks.begin() + static_cast<ptrdiff_t>(off + len));
      segments.push_back(std::move(s));
    }
  }
  return segments;
}

}  // namespace mdpt::data
