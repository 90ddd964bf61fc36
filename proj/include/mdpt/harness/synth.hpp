#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mdpt/analysis/probe.hpp"

namespace mdpt::harness {

// Stand-ins for the generic / bio-medical / clinical corpora: three grammars
// with distinct lexicons, sentence lengths and punctuation conventions.
struct SyntheticDomainSpec {
  std::string name;
  std::string grammar;  // "newswire" | "biomed" | "clinical"
  double skew = 1.0;    // zipf exponent over the ranked word list
  size_t num_docs = 300;
  size_t tokens_per_doc = 400;  // approximate bytes per document

  void validate() const;
};

struct GeneratedDomain {
  std::string name;
  std::vector<std::string> documents;
  analysis::ProbeDataset probe;  // lexicon-membership token tagging
};

GeneratedDomain generate_domain(const SyntheticDomainSpec& spec, uint64_t seed);

// Held-out accuracy of a bag-of-tokens naive-Bayes classifier between two
// generated domains; the generation-time distinguishability check.
double domain_classifier_accuracy(const GeneratedDomain& a, const GeneratedDomain& b);

struct DomainFiles {
  std::string name;
  std::string corpus_path;
  std::string probe_path;
};

struct GenResult {
  std::vector<DomainFiles> domains;
  std::map<std::string, double> classifier_accuracy;  // "a|b" -> held-out accuracy
  std::string manifest_path;
};

// Writes blank-line-separated corpora, probe datasets and a generation
// manifest. Fails if any domain pair scores below 0.9 held-out accuracy.
GenResult gen_domains(const std::vector<SyntheticDomainSpec>& specs,
                      const std::string& outdir, uint64_t seed);

std::vector<SyntheticDomainSpec> default_domain_specs(size_t num_docs, size_t tokens_per_doc);

constexpr double kMinDomainSeparability = 0.9;

}  // namespace mdpt::harness
