// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spn::ad {

using Shape = std::vector<std::size_t>;
using NodeId = std::size_t;

class Tape;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles.
///
/// Values are shared and immutable once a tensor has been handed to an
/// operation, so copying a Tensor is cheap. A tensor attached to a Tape
/// (requires_grad() == true) carries the id of the node that produced it.
/// Rank-0 tensors are scalars.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const { return data_->size(); }

  std::span<const double> values() const { return *data_; }
  double operator[](std::size_t flat) const { return (*data_)[flat]; }
  /// Value of a single-element tensor.
  double item() const;

  /// Copy-on-write access. Only legal on tensors that are not on a tape.
  std::vector<double>& mutable_values();

  bool requires_grad() const { return node_.has_value(); }
  std::optional<NodeId> node_id() const { return node_; }
  Tape* tape() const { return tape_; }

  /// Same values, no tape attachment.
  Tensor detached() const;

 private:
  friend class Tape;

  Shape shape_;
  std::shared_ptr<std::vector<double>> data_;
  Tape* tape_ = nullptr;
  std::optional<NodeId> node_;
};

}  // namespace spn::ad
