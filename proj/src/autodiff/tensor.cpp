// SPDX-License-Identifier: Apache-2.0
#include "spn/autodiff/tensor.hpp"

#include <sstream>

#include "spn/util/errors.hpp"

namespace spn::ad {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor() : shape_{}, data_(std::make_shared<std::vector<double>>(1, 0.0)) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::make_shared<std::vector<double>>(std::move(values))) {
  for (std::size_t extent : shape_) {
    if (extent == 0) throw ShapeError("tensor: zero extent in shape " + shape_str(shape_));
  }
  if (shape_numel(shape_) != data_->size()) {
    throw ShapeError("tensor: shape " + shape_str(shape_) + " needs " +
                     std::to_string(shape_numel(shape_)) + " values, got " +
                     std::to_string(data_->size()));
  }
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item: tensor of shape " + shape_str(shape_) + " is not a scalar");
  return (*data_)[0];
}

std::vector<double>& Tensor::mutable_values() {
  if (tape_ != nullptr) throw UsageError("mutable_values: tensor is attached to a tape");
  if (data_.use_count() > 1) data_ = std::make_shared<std::vector<double>>(*data_);
  return *data_;
}

Tensor Tensor::detached() const {
  Tensor out = *this;
  out.tape_ = nullptr;
  out.node_.reset();
  return out;
}

}  // namespace spn::ad
