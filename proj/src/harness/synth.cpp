#include "mdpt/harness/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include "mdpt/data/corpus.hpp"
#include "mdpt/data/vocab.hpp"
#include "mdpt/util.hpp"

namespace mdpt::harness {

namespace {

const std::vector<std::string> kSharedWords = {
    "the", "a",  "of",   "to",  "and",  "in",   "on",  "for", "with", "is",
    "was", "at", "from", "be",  "as",   "that", "it",  "by",  "this", "an"};

const std::vector<std::string> kNewswireLexicon = {
    "minister", "government", "market",  "police",  "election", "senate",  "mayor",
    "reporter", "treaty",     "stocks",  "trade",   "council",  "capital", "border",
    "strike",   "union",      "court",   "budget",  "summit",   "embassy", "voters",
    "campaign", "deficit",    "exports", "tariffs", "protest"};

const std::vector<std::string> kBiomedLexicon = {
    "protein",  "receptor", "enzyme",   "cells",    "tumor",    "gene",     "antibody",
    "plasma",   "kinase",   "mutation", "dosage",   "lesion",   "therapy",  "membrane",
    "assay",    "serum",    "glucose",  "cortex",   "neuron",   "pathogen", "cohort",
    "placebo",  "biopsy",   "antigen",  "clinical", "molecule"};

const std::vector<std::string> kClinicalLexicon = {
    "patient", "admitted", "discharged", "exam",     "labs",   "stable", "acute",
    "chronic", "noted",    "denies",     "alert",    "orient", "wound",  "afebrile",
    "bilat",   "hx",       "dx",         "rx",       "prn",    "bid",    "meds",
    "pain",    "edema",    "intact",     "followup", "vitals"};

struct Grammar {
  const std::vector<std::string>* lexicon;
  size_t min_words, max_words;
  char terminator;
  bool capitalize;     // capitalize the first word of a sentence
  bool parenthesize;   // occasionally wrap a word in parentheses
  bool numerics;       // inject numeric tokens (vitals-style)
};

Grammar grammar_for(const std::string& id) {
  if (id == "newswire") return Grammar{&kNewswireLexicon, 8, 14, '.', true, false, false};
  if (id == "biomed") return Grammar{&kBiomedLexicon, 12, 20, '.', false, true, false};
  if (id == "clinical") return Grammar{&kClinicalLexicon, 3, 7, ';', false, false, true};
  throw std::invalid_argument("unknown grammar id: " + id);
}

// Ranked word list interleaving lexicon and shared words so both stay
// frequent under the zipf skew.
std::vector<std::pair<std::string, bool>> ranked_words(const Grammar& g) {
  std::vector<std::pair<std::string, bool>> words;
  const size_t n = std::max(g.lexicon->size(), kSharedWords.size());
  for (size_t i = 0; i < n; ++i) {
    if (i < g.lexicon->size()) words.emplace_back((*g.lexicon)[i], true);
    if (i < kSharedWords.size()) words.emplace_back(kSharedWords[i], false);
  }
  return words;
}

std::vector<double> zipf_cdf(size_t n, double skew) {
  std::vector<double> cdf(n);
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    total += 1.0 / std::pow(static_cast<double>(i + 1), skew);
    cdf[i] = total;
  }
  for (double& v : cdf) v /= total;
  return cdf;
}

size_t draw_rank(const std::vector<double>& cdf, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng);
  return static_cast<size_t>(
      std::lower_bound(cdf.begin(), cdf.end(), r) - cdf.begin());
}

struct TaggedText {
  std::string text;
  std::vector<uint8_t> tags;  // per byte, 1 = lexicon word byte

  void append(const std::string& s, bool lexicon) {
    text += s;
    tags.insert(tags.end(), s.size(), lexicon ? 1 : 0);
  }
};

TaggedText render_sentence(const Grammar& g,
                           const std::vector<std::pair<std::string, bool>>& words,
                           const std::vector<double>& cdf, std::mt19937_64& rng) {
  std::uniform_int_distribution<size_t> len_dist(g.min_words, g.max_words);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const size_t n_words = len_dist(rng);
  TaggedText out;
  for (size_t w = 0; w < n_words; ++w) {
    if (w > 0) out.append(" ", false);
    if (g.numerics && u(rng) < 0.15) {
      std::uniform_int_distribution<int> hi(80, 180), lo(40, 95);
      out.append(std::to_string(hi(rng)) + "/" + std::to_string(lo(rng)), false);
      continue;
    }
    auto [word, lex] = words[draw_rank(cdf, rng)];
    if (g.capitalize && w == 0) word[0] = static_cast<char>(std::toupper(word[0]));
    const bool wrap = g.parenthesize && u(rng) < 0.08;
    if (wrap) out.append("(", false);
    out.append(word, lex);
    if (wrap) out.append(")", false);
    if (w + 1 < n_words && u(rng) < 0.1) out.append(",", false);
  }
  out.append(std::string(1, g.terminator), false);
  return out;
}

}  // namespace

void SyntheticDomainSpec::validate() const {
  grammar_for(grammar);
  if (num_docs < data::kMinIngestDocuments)
    throw std::invalid_argument("SyntheticDomainSpec: num_docs below ingest minimum");
  if (tokens_per_doc < 32)
    throw std::invalid_argument("SyntheticDomainSpec: tokens_per_doc too small");
  if (skew <= 0.0) throw std::invalid_argument("SyntheticDomainSpec: skew must be positive");
}

GeneratedDomain generate_domain(const SyntheticDomainSpec& spec, uint64_t seed) {
  spec.validate();
  const Grammar g = grammar_for(spec.grammar);
  const auto words = ranked_words(g);
  const auto cdf = zipf_cdf(words.size(), spec.skew);

  GeneratedDomain out;
  out.name = spec.name;
  std::mt19937_64 rng(derive_seed(seed, fnv1a64(spec.name)));
  for (size_t d = 0; d < spec.num_docs; ++d) {
    std::string doc;
    while (doc.size() < spec.tokens_per_doc) {
      TaggedText s = render_sentence(g, words, cdf, rng);
      if (!doc.empty()) doc += g.numerics ? '\n' : ' ';
      doc += s.text;
    }
    out.documents.push_back(std::move(doc));
  }

  // Probe sequences come from a dedicated stream so the tagging data is
  // disjoint from the pre-training text.
  std::mt19937_64 probe_rng(derive_seed(seed, fnv1a64(spec.name) ^ 0x9E0BEu));
  constexpr size_t kProbeTrain = 48, kProbeTest = 24;
  for (size_t i = 0; i < kProbeTrain + kProbeTest; ++i) {
    TaggedText s = render_sentence(g, words, cdf, probe_rng);
    std::vector<int32_t> tokens{data::kBosToken};
    std::vector<uint8_t> tags{0};
    auto ids = data::tokenize_bytes(s.text);
    tokens.insert(tokens.end(), ids.begin(), ids.end());
    tags.insert(tags.end(), s.tags.begin(), s.tags.end());
    if (i < kProbeTrain) {
      out.probe.train_tokens.push_back(std::move(tokens));
      out.probe.train_tags.push_back(std::move(tags));
    } else {
      out.probe.test_tokens.push_back(std::move(tokens));
      out.probe.test_tags.push_back(std::move(tags));
    }
  }
  return out;
}

double domain_classifier_accuracy(const GeneratedDomain& a, const GeneratedDomain& b) {
  // Multinomial naive Bayes over byte tokens, 80/20 train/held-out per domain.
  auto counts = [](const std::vector<std::string>& docs, size_t from, size_t to) {
    std::vector<double> c(256, 1.0);  // Laplace smoothing
    for (size_t i = from; i < to; ++i)
      for (unsigned char ch : docs[i]) c[ch] += 1.0;
    double total = 0.0;
    for (double v : c) total += v;
    for (double& v : c) v = std::log(v / total);
    return c;
  };
  auto split_at = [](const GeneratedDomain& d) { return (d.documents.size() * 8) / 10; };
  const size_t ka = split_at(a), kb = split_at(b);
  const auto la = counts(a.documents, 0, ka);
  const auto lb = counts(b.documents, 0, kb);

  size_t correct = 0, total = 0;
  auto eval = [&](const std::vector<std::string>& docs, size_t from, bool is_a) {
    for (size_t i = from; i < docs.size(); ++i) {
      double sa = 0.0, sb = 0.0;
      for (unsigned char ch : docs[i]) {
        sa += la[ch];
        sb += lb[ch];
      }
      const bool pred_a = sa >= sb;
      correct += (pred_a == is_a) ? 1 : 0;
      ++total;
    }
  };
  eval(a.documents, ka, true);
  eval(b.documents, kb, false);
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

std::vector<SyntheticDomainSpec> default_domain_specs(size_t num_docs, size_t tokens_per_doc) {
  return {
      SyntheticDomainSpec{"newswire", "newswire", 1.0, num_docs, tokens_per_doc},
      SyntheticDomainSpec{"biomed", "biomed", 1.1, num_docs, tokens_per_doc},
      SyntheticDomainSpec{"clinical", "clinical", 1.2, num_docs, tokens_per_doc},
  };
}

GenResult gen_domains(const std::vector<SyntheticDomainSpec>& specs,
                      const std::string& outdir, uint64_t seed) {
  if (specs.size() < 2)
    throw std::invalid_argument("gen_domains: need at least 2 specs for a continual experiment");
  std::filesystem::create_directories(outdir);

  std::vector<GeneratedDomain> generated;
  generated.reserve(specs.size());
  for (const auto& spec : specs) generated.push_back(generate_domain(spec, seed));

  GenResult result;
  for (size_t i = 0; i < generated.size(); ++i) {
    for (size_t j = i + 1; j < generated.size(); ++j) {
      const double acc = domain_classifier_accuracy(generated[i], generated[j]);
      result.classifier_accuracy[generated[i].name + "|" + generated[j].name] = acc;
      if (acc < kMinDomainSeparability)
        throw std::invalid_argument("gen_domains: domains " + generated[i].name + " and " +
                                    generated[j].name + " are not distinguishable (acc " +
                                    std::to_string(acc) + ")");
    }
  }

  for (size_t i = 0; i < generated.size(); ++i) {
    DomainFiles files;
    files.name = generated[i].name;
    files.corpus_path = outdir + "/" + files.name + ".txt";
    files.probe_path = outdir + "/" + files.name + ".probe.json";
    std::ofstream out(files.corpus_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write corpus: " + files.corpus_path);
    for (size_t d = 0; d < generated[i].documents.size(); ++d) {
      if (d) out << "\n\n";
      out << generated[i].documents[d];
    }
    out << "\n";
    analysis::save_probe_dataset(generated[i].probe, files.probe_path);
    result.domains.push_back(std::move(files));
  }

  nlohmann::json manifest;
  manifest["seed"] = seed;
  nlohmann::json spec_list = nlohmann::json::array();
  for (const auto& s : specs)
    spec_list.push_back({{"name", s.name},
                         {"grammar", s.grammar},
                         {"skew", s.skew},
                         {"num_docs", s.num_docs},
                         {"tokens_per_doc", s.tokens_per_doc}});
  manifest["specs"] = spec_list;
  manifest["classifier_accuracy"] = result.classifier_accuracy;
  result.manifest_path = outdir + "/manifest.json";
  std::ofstream mf(result.manifest_path);
  if (!mf) throw std::runtime_error("cannot write manifest: " + result.manifest_path);
  mf << manifest.dump(2) << "\n";
  return result;
}

}  // namespace mdpt::harness
