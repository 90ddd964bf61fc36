#pragma once

#include <functional>

#include "mdpt/numcore/tensor.hpp"

namespace mdpt::numcore {

using ScalarFn = std::function<double(const ParameterSet&)>;

// Central-difference gradient estimate, (f(x+e) - f(x-e)) / 2e per coordinate.
// f must be deterministic. The gradient-checking oracle for the tape.
GradientMap finite_diff_grad(const ScalarFn& f, const ParameterSet& params, double eps);

// Single-coordinate variant for spot checks on large models.
double finite_diff_coord(const ScalarFn& f, const ParameterSet& params,
                         const std::string& name, size_t index, double eps);

}  // namespace mdpt::numcore
