#pragma once

#include "mdpt/mitigation/fisher.hpp"
#include "mdpt/numcore/tape.hpp"
#include "mdpt/numcore/tensor.hpp"

namespace mdpt::mitigation {

// Quadratic anchor penalty: sum_i lambda * F_i * (theta_i - anchor_i)^2.
// lambda sits inside the sum with no 1/2 factor. With use_fisher = false the
// Fisher weights are replaced by 1 everywhere (the no-Fisher ablation) and
// `fisher` may be null. Differentiable w.r.t. the parameter leaves; gradient
// is 2 * lambda * F_i * (theta_i - anchor_i).
numcore::Value ewc_penalty(numcore::Tape& tape, const numcore::ParameterSet& params,
                           const numcore::ParameterSet& anchor, const FisherDiagonal* fisher,
                           double lambda, bool use_fisher = true);

}  // namespace mdpt::mitigation
