#include "mdpt/selection/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

namespace mdpt::selection {

Strategy parse_strategy(const std::string& s) {
  if (s == "random") return Strategy::kRandom;
  if (s == "low") return Strategy::kLow;
  if (s == "high") return Strategy::kHigh;
  if (s == "uniform") return Strategy::kUniform;
  throw std::invalid_argument("unknown selection strategy: " + s);
}

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kRandom: return "random";
    case Strategy::kLow: return "low";
    case Strategy::kHigh: return "high";
    case Strategy::kUniform: return "uniform";
  }
  return "?";
}

namespace {

std::vector<size_t> sample_without_replacement(size_t population, size_t n,
                                               std::mt19937_64& rng) {
  std::vector<size_t> idx(population);
  std::iota(idx.begin(), idx.end(), 0);
  for (size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<size_t> pick(i, population - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  return idx;
}

// Round-robin over groups in ascending key order; members of each group are
// pre-shuffled so draws within a group are uniform without replacement.
std::vector<size_t> round_robin_draw(std::map<long long, std::vector<size_t>>& groups,
                                     size_t n, std::mt19937_64& rng) {
  for (auto& [key, members] : groups) std::shuffle(members.begin(), members.end(), rng);
  std::vector<size_t> out;
  out.reserve(n);
  for (size_t round = 0; out.size() < n; ++round) {
    bool any = false;
    for (auto& [key, members] : groups) {
      if (round < members.size()) {
        any = true;
        out.push_back(members[round]);
        if (out.size() == n) break;
      }
    }
    if (!any) break;  // all groups exhausted
  }
  return out;
}

}  // namespace

std::vector<size_t> select_by_strategy(const std::vector<double>& features, size_t n,
                                       Strategy strategy, size_t num_bins, uint64_t seed) {
  const size_t pop = features.size();
  if (n > pop)
    throw std::invalid_argument("select_by_strategy: n " + std::to_string(n) +
                                " exceeds population " + std::to_string(pop));
  std::mt19937_64 rng(seed);

  switch (strategy) {
    case Strategy::kLow:
    case Strategy::kHigh: {
      std::vector<size_t> idx(pop);
      std::iota(idx.begin(), idx.end(), 0);
      const bool low = strategy == Strategy::kLow;
      std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
        if (features[a] != features[b])
          return low ? features[a] < features[b] : features[a] > features[b];
        return a < b;  // ties broken by lower index
      });
      idx.resize(n);
      return idx;
    }
    case Strategy::kRandom:
      return sample_without_replacement(pop, n, rng);
    case Strategy::kUniform: {
      if (num_bins < 1) throw std::invalid_argument("select_by_strategy: num_bins must be >= 1");
      const auto [mn_it, mx_it] = std::minmax_element(features.begin(), features.end());
      const double mn = *mn_it, mx = *mx_it;
      if (mx == mn)  // all-equal features: binning is meaningless, fall back to random
        return sample_without_replacement(pop, n, rng);
      std::map<long long, std::vector<size_t>> bins;
      const double scale = static_cast<double>(num_bins) / (mx - mn);
      for (size_t i = 0; i < pop; ++i) {
        auto b = static_cast<long long>((features[i] - mn) * scale);
        b = std::min<long long>(b, static_cast<long long>(num_bins) - 1);
        bins[b].push_back(i);
      }
      return round_robin_draw(bins, n, rng);
    }
  }
  throw std::logic_error("select_by_strategy: unreachable");
}

std::vector<size_t> cluster_uniform_sample(const std::vector<int>& labels, size_t n,
                                           uint64_t seed) {
  if (n > labels.size())
    throw std::invalid_argument("cluster_uniform_sample: n exceeds population");
  std::map<long long, std::vector<size_t>> clusters;
  for (size_t i = 0; i < labels.size(); ++i) clusters[labels[i]].push_back(i);
  std::mt19937_64 rng(seed);
  return round_robin_draw(clusters, n, rng);
}

}  // namespace mdpt::selection
