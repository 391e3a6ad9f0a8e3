#include "planefield/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "planefield/errors.hpp"

namespace planefield {

ValidationError::ValidationError(std::vector<std::string> problems)
    : std::runtime_error([&] {
        std::string msg = std::to_string(problems.size()) + " validation problem(s)";
        for (const auto& p : problems) msg += "; " + p;
        return msg;
      }()),
      problems_(std::move(problems)) {}

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

static void check_shape(const Shape& shape) {
  if (shape.empty()) throw ContractViolation("tensor shape must have at least one axis");
  for (auto d : shape)
    if (d == 0) throw ContractViolation("tensor shape " + shape_string(shape) + " has a zero axis");
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  values_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, const std::vector<double>& values)
    : Tensor(std::move(shape), Buffer(values.begin(), values.end())) {}

Tensor::Tensor(Shape shape, Buffer values) : shape_(std::move(shape)), values_(std::move(values)) {
  check_shape(shape_);
  if (values_.size() != element_count(shape_))
    throw ContractViolation("tensor shape " + shape_string(shape_) + " needs " +
                            std::to_string(element_count(shape_)) + " values, got " +
                            std::to_string(values_.size()));
}

double Tensor::item() const {
  if (values_.size() != 1)
    throw ContractViolation("item() on non-scalar tensor of shape " + shape_string(shape_));
  return values_[0];
}

std::span<double> Tensor::grad() {
  if (grad_.size() != values_.size()) grad_.assign(values_.size(), 0.0);
  return grad_;
}

void Tensor::zero_grad() {
  if (grad_.size() != values_.size()) grad_.assign(values_.size(), 0.0);
  else std::fill(grad_.begin(), grad_.end(), 0.0);
}

void Tensor::reshape(Shape shape) {
  check_shape(shape);
  if (element_count(shape) != values_.size())
    throw ContractViolation("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  shape_ = std::move(shape);
}

}  // namespace planefield
