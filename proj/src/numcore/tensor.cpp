#include "mdpt/numcore/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mdpt::numcore {

size_t shape_size(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

std::string shape_str(const std::vector<size_t>& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ")";
  return os.str();
}

Tensor::Tensor(std::vector<size_t> shape)
    : shape_(std::move(shape)), values_(shape_size(shape_), 0.0) {}

Tensor::Tensor(std::vector<size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_size(shape_))
    throw std::invalid_argument("Tensor: value count " + std::to_string(values_.size()) +
                                " does not match shape " + shape_str(shape_));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::full(std::vector<size_t> shape, double v) {
  Tensor t(std::move(shape));
  for (double& x : t.values_) x = v;
  return t;
}

size_t Tensor::rows() const {
  if (shape_.size() == 1) return 1;
  if (shape_.size() == 2) return shape_[0];
  throw std::invalid_argument("Tensor: no 2-D view for shape " + shape_str(shape_));
}

size_t Tensor::cols() const {
  if (shape_.size() == 1) return shape_[0];
  if (shape_.size() == 2) return shape_[1];
  throw std::invalid_argument("Tensor: no 2-D view for shape " + shape_str(shape_));
}

bool Tensor::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

double Tensor::item() const {
  if (values_.size() != 1)
    throw std::invalid_argument("Tensor::item on non-scalar of shape " + shape_str(shape_));
  return values_[0];
}

}  // namespace mdpt::numcore
