#pragma once

#include <cstddef>
#include <vector>

namespace mdpt::mitigation {

// Geometric learning-rate decay from the output toward the input:
// rate(top) = eta_top, rate(g-1) = rate(g) / rho. Index 0 is the input
// group, the last index the LM head.
std::vector<double> lrc_schedule(double eta_top, double rho, size_t num_groups);

}  // namespace mdpt::mitigation
