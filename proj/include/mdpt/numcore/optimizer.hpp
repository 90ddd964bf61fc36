#pragma once

#include <map>
#include <string>
#include <vector>

#include "mdpt/numcore/tensor.hpp"

namespace mdpt::numcore {

enum class OptAlgo { kSgd, kAdam };

struct OptimizerConfig {
  OptAlgo algo = OptAlgo::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-6;
};

// Adam/SGD with a per-parameter-group learning rate. Every parameter name
// must map to a group, every group to a rate. Deterministic given identical
// inputs and state.
class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, std::map<std::string, int> group_of,
            std::vector<double> group_lrs);
  // Single-group convenience: every parameter trains at `lr`.
  static Optimizer uniform(OptimizerConfig cfg, double lr);

  // Updates every parameter in `params` in place. Throws if a parameter has
  // no gradient or no group assignment.
  void step(ParameterSet& params, const GradientMap& grads);

  size_t step_count() const { return step_; }
  const std::vector<double>& group_lrs() const { return group_lrs_; }
  double lr_for(const std::string& name) const;

 private:
  OptimizerConfig cfg_;
  std::map<std::string, int> group_of_;
  std::vector<double> group_lrs_;
  bool uniform_ = false;
  GradientMap m_;
  GradientMap v_;
  size_t step_ = 0;
};

}  // namespace mdpt::numcore
