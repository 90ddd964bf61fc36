#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace mdpt::numcore {

// Dense row-major float64 tensor. Values must stay finite; every tape op
// validates its output and throws on NaN/Inf.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<size_t> shape);
  Tensor(std::vector<size_t> shape, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor full(std::vector<size_t> shape, double v);

  const std::vector<size_t>& shape() const { return shape_; }
  size_t size() const { return values_.size(); }

  // 2-D view helpers: {r,c} -> r x c, {n} -> 1 x n.
  size_t rows() const;
  size_t cols() const;

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  double& operator[](size_t i) { return values_[i]; }
  double operator[](size_t i) const { return values_[i]; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;
  double item() const;  // single-element tensors only

 private:
  std::vector<size_t> shape_;
  std::vector<double> values_;
};

size_t shape_size(const std::vector<size_t>& shape);
std::string shape_str(const std::vector<size_t>& shape);

// Flat named parameter map; the unit EWC, Fisher and the optimizer operate on.
using ParameterSet = std::map<std::string, Tensor>;
using GradientMap = std::map<std::string, Tensor>;

}  // namespace mdpt::numcore
