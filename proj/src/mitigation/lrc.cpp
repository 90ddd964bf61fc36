#include "mdpt/mitigation/lrc.hpp"

#include <stdexcept>

namespace mdpt::mitigation {

std::vector<double> lrc_schedule(double eta_top, double rho, size_t num_groups) {
  if (eta_top <= 0.0) throw std::invalid_argument("lrc_schedule: eta_top must be positive");
  if (rho < 1.0)
    throw std::invalid_argument("lrc_schedule: rho must be >= 1 (no amplification toward input)");
  if (num_groups < 1) throw std::invalid_argument("lrc_schedule: need at least one group");
  std::vector<double> rates(num_groups);
  rates[num_groups - 1] = eta_top;
  for (size_t g = num_groups - 1; g > 0; --g) rates[g - 1] = rates[g] / rho;
  return rates;
}

}  // namespace mdpt::mitigation
