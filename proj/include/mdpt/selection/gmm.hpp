#pragma once

#include <cstdint>
#include <vector>

namespace mdpt::selection {

struct GmmModel {
  std::vector<double> weights;                  // k, sums to 1
  std::vector<std::vector<double>> means;       // k x d
  std::vector<std::vector<double>> variances;   // k x d diagonal, floored at 1e-6
  double log_likelihood = 0.0;
  size_t iterations = 0;
  std::vector<double> ll_history;               // one entry per EM iteration
};

// EM with diagonal covariances, seeded k-means++ init. Stops at max_iters or
// when the log-likelihood improvement falls below tol. An empty component is
// re-seeded at the least-claimed point; after 3 such repairs fitting fails.
GmmModel gmm_fit(const std::vector<std::vector<double>>& X, size_t k, size_t max_iters,
                 double tol, uint64_t seed);

// Hard assignments: argmax responsibility, ties to the lowest component.
std::vector<int> gmm_assign(const GmmModel& model, const std::vector<std::vector<double>>& X);

constexpr double kGmmVarianceFloor = 1e-6;

}  // namespace mdpt::selection
