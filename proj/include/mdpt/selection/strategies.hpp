#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mdpt::selection {

enum class Strategy { kRandom, kLow, kHigh, kUniform };

Strategy parse_strategy(const std::string& s);
std::string strategy_name(Strategy s);

// Picks n segment indices from a scalar feature list.
//   low / high : exact order statistics, ties broken by lower index
//   random     : seeded uniform draw without replacement
//   uniform    : equal-width bins over [min, max], round-robin over non-empty
//                bins in ascending order, seeded uniform draw within each bin
// All-equal features degrade the uniform strategy to random.
std::vector<size_t> select_by_strategy(const std::vector<double>& features, size_t n,
                                       Strategy strategy, size_t num_bins, uint64_t seed);

// Round-robin across clusters in ascending label order, seeded uniform draw
// without replacement inside each cluster, skipping exhausted clusters.
std::vector<size_t> cluster_uniform_sample(const std::vector<int>& labels, size_t n,
                                           uint64_t seed);

}  // namespace mdpt::selection
