#include "mdpt/mitigation/ewc.hpp"

#include <stdexcept>

namespace mdpt::mitigation {

using numcore::Tape;
using numcore::Value;

Value ewc_penalty(Tape& tape, const numcore::ParameterSet& params,
                  const numcore::ParameterSet& anchor, const FisherDiagonal* fisher,
                  double lambda, bool use_fisher) {
  if (lambda < 0.0) throw std::invalid_argument("ewc_penalty: lambda must be >= 0");
  if (use_fisher) {
    if (fisher == nullptr) throw std::invalid_argument("ewc_penalty: missing FisherDiagonal");
    fisher->validate_against(params);
  }
  Value total;
  for (const auto& [name, theta] : params) {
    auto ait = anchor.find(name);
    if (ait == anchor.end() || !ait->second.same_shape(theta))
      throw std::invalid_argument("ewc_penalty: anchor mismatch for " + name);
    Value leaf = tape.param(name, theta);
    Value diff = tape.sub(leaf, tape.input(ait->second));
    Value sq = tape.square(diff);
    if (use_fisher) sq = tape.mul(sq, tape.input(fisher->values.at(name)));
    Value term = tape.sum_all(sq);
    total = total.valid() ? tape.add(total, term) : term;
  }
  return tape.scale(total, lambda);
}

}  // namespace mdpt::mitigation
