#pragma once

#include <cstddef>
#include <vector>

namespace mdpt::selection {

struct PcaModel {
  std::vector<double> mean;                      // D
  std::vector<std::vector<double>> components;   // d orthonormal rows of length D
  std::vector<double> explained_variance;        // descending, >= 0
  bool zero_variance = false;                    // flagged degenerate input
};

// Top-d principal directions of mean-centered X (n x D rows). Variances use
// the unbiased (n-1) sample covariance. Requires n >= 2 and d <= min(n, D).
PcaModel pca_fit(const std::vector<std::vector<double>>& X, size_t d);

// Projects centered rows onto the components: (x - mean) * C^T.
std::vector<std::vector<double>> pca_transform(const PcaModel& model,
                                               const std::vector<std::vector<double>>& X);

}  // namespace mdpt::selection
