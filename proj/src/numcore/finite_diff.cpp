#include "mdpt/numcore/finite_diff.hpp"

#include <stdexcept>

namespace mdpt::numcore {

GradientMap finite_diff_grad(const ScalarFn& f, const ParameterSet& params, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("finite_diff_grad: eps must be positive");
  ParameterSet probe = params;
  GradientMap out;
  for (const auto& [name, theta] : params) {
    Tensor g(theta.shape());
    Tensor& p = probe[name];
    for (size_t i = 0; i < theta.size(); ++i) {
      const double orig = p[i];
      p[i] = orig + eps;
      double hi = f(probe);
      p[i] = orig - eps;
      double lo = f(probe);
      p[i] = orig;
      g[i] = (hi - lo) / (2.0 * eps);
    }
    out[name] = std::move(g);
  }
  return out;
}

double finite_diff_coord(const ScalarFn& f, const ParameterSet& params,
                         const std::string& name, size_t index, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("finite_diff_coord: eps must be positive");
  auto it = params.find(name);
  if (it == params.end())
    throw std::invalid_argument("finite_diff_coord: unknown parameter " + name);
  if (index >= it->second.size())
    throw std::invalid_argument("finite_diff_coord: index out of range for " + name);
  ParameterSet probe = params;
  Tensor& p = probe[name];
  const double orig = p[index];
  p[index] = orig + eps;
  double hi = f(probe);
  p[index] = orig - eps;
  double lo = f(probe);
  return (hi - lo) / (2.0 * eps);
}

}  // namespace mdpt::numcore
