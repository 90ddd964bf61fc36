#include "mdpt/numcore/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace mdpt::numcore {

Optimizer::Optimizer(OptimizerConfig cfg, std::map<std::string, int> group_of,
                     std::vector<double> group_lrs)
    : cfg_(cfg), group_of_(std::move(group_of)), group_lrs_(std::move(group_lrs)) {
  if (group_lrs_.empty()) throw std::invalid_argument("Optimizer: empty group LR map");
  for (double lr : group_lrs_)
    if (lr < 0.0 || !std::isfinite(lr))
      throw std::invalid_argument("Optimizer: negative or non-finite learning rate");
}

Optimizer Optimizer::uniform(OptimizerConfig cfg, double lr) {
  Optimizer opt(cfg, {}, {lr});
  opt.uniform_ = true;
  return opt;
}

double Optimizer::lr_for(const std::string& name) const {
  if (uniform_) return group_lrs_[0];
  auto it = group_of_.find(name);
  if (it == group_of_.end())
    throw std::invalid_argument("Optimizer: no group for parameter " + name);
  int g = it->second;
  if (g < 0 || static_cast<size_t>(g) >= group_lrs_.size())
    throw std::invalid_argument("Optimizer: no learning rate for group " + std::to_string(g));
  return group_lrs_[static_cast<size_t>(g)];
}

void Optimizer::step(ParameterSet& params, const GradientMap& grads) {
  ++step_;
  const double t = static_cast<double>(step_);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
  for (auto& [name, theta] : params) {
    auto git = grads.find(name);
    if (git == grads.end())
      throw std::invalid_argument("Optimizer: missing gradient for parameter " + name);
    const Tensor& g = git->second;
    if (!g.same_shape(theta))
      throw std::invalid_argument("Optimizer: gradient shape mismatch for " + name);
    const double lr = lr_for(name);
    if (cfg_.algo == OptAlgo::kSgd) {
      for (size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * g[i];
      continue;
    }
    Tensor& m = m_[name];
    Tensor& v = v_[name];
    if (m.size() == 0) m = Tensor(theta.shape());
    if (v.size() == 0) v = Tensor(theta.shape());
    for (size_t i = 0; i < theta.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      theta[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace mdpt::numcore
