// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "spn/autodiff/tensor.hpp"

namespace spn::ad {

/// What a node's backward rule sees: the incoming gradient of its output and
/// one accumulation buffer per input. Buffers of inputs that do not require
/// a gradient are empty; rules must add into (not overwrite) the buffers.
struct BackwardContext {
  std::span<const double> grad_out;
  std::vector<std::span<double>> grad_in;

  bool needs(std::size_t input) const { return !grad_in[input].empty(); }
};

using BackwardFn = std::function<void(BackwardContext&)>;

/// Gradients of a scalar loss, keyed by the node id of each leaf.
class GradientMap {
 public:
  bool contains(NodeId id) const { return grads_.count(id) != 0; }
  const Tensor& at(NodeId id) const;
  /// Gradient for a watched leaf tensor.
  const Tensor& operator[](const Tensor& leaf) const;
  std::size_t size() const { return grads_.size(); }

 private:
  friend class Tape;
  std::unordered_map<NodeId, Tensor> grads_;
};

/// Linear record of differentiable operations for one forward pass.
///
/// Nodes are appended in execution order, so the record is topologically
/// sorted by construction. A tape supports exactly one backward pass; it is
/// not thread-safe and must outlive every tensor attached to it.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a leaf. The returned tensor shares values with `value`.
  Tensor watch(const Tensor& value);

  /// Appends an operation node. `inputs` may contain tensors that are not on
  /// this tape; they are treated as constants.
  Tensor record(std::string_view op, std::span<const Tensor* const> inputs, Tensor output,
                BackwardFn backward);

  GradientMap backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }
  std::string_view op_name(NodeId id) const { return nodes_.at(id).op; }

 private:
  struct Node {
    std::string op;
    std::vector<std::optional<NodeId>> inputs;
    Shape shape;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

/// Builds the result of a primitive: checks finiteness, finds the tape shared
/// by the inputs (if any) and records the node. Layer code uses this to add
/// fused primitives with their own backward rule.
Tensor make_result(std::string_view op, std::initializer_list<const Tensor*> inputs,
                   Shape shape, std::vector<double> values, BackwardFn backward);
Tensor make_result(std::string_view op, std::span<const Tensor* const> inputs, Shape shape,
                   std::vector<double> values, BackwardFn backward);

namespace debug {

/// While alive, the backward rule of primitive `op` produces gradients that
/// are off by one percent. Used to prove the gradient checker catches broken
/// rules.
class ScopedCorruptBackward {
 public:
  explicit ScopedCorruptBackward(std::string op);
  ~ScopedCorruptBackward();
  ScopedCorruptBackward(const ScopedCorruptBackward&) = delete;
  ScopedCorruptBackward& operator=(const ScopedCorruptBackward&) = delete;

 private:
  std::string previous_;
};

const std::string& corrupted_op();

}  // namespace debug

}  // namespace spn::ad
