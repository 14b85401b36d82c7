// SPDX-License-Identifier: Apache-2.0
#include "spn/autodiff/tape.hpp"

#include <cmath>

#include "spn/util/errors.hpp"

namespace spn::ad {

namespace {
thread_local std::string g_corrupted_op;
}  // namespace

const Tensor& GradientMap::at(NodeId id) const {
  auto it = grads_.find(id);
  if (it == grads_.end()) throw UsageError("gradient map: no gradient for node " + std::to_string(id));
  return it->second;
}

const Tensor& GradientMap::operator[](const Tensor& leaf) const {
  if (!leaf.node_id()) throw UsageError("gradient map: tensor is not on a tape");
  return at(*leaf.node_id());
}

Tensor Tape::watch(const Tensor& value) {
  if (consumed_) throw UsageError("tape: watch() after backward()");
  if (value.tape_ != nullptr) throw UsageError("tape: tensor is already attached to a tape");
  Tensor out = value;
  out.tape_ = this;
  out.node_ = nodes_.size();
  nodes_.push_back(Node{"leaf", {}, value.shape(), {}});
  return out;
}

Tensor Tape::record(std::string_view op, std::span<const Tensor* const> inputs, Tensor output,
                    BackwardFn backward) {
  if (consumed_) throw UsageError("tape: cannot record '" + std::string(op) + "' after backward()");
  Node node{std::string(op), {}, output.shape(), std::move(backward)};
  node.inputs.reserve(inputs.size());
  for (const Tensor* in : inputs) {
    node.inputs.push_back(in->tape_ == this ? in->node_ : std::nullopt);
  }
  output.tape_ = this;
  output.node_ = nodes_.size();
  nodes_.push_back(std::move(node));
  return output;
}

GradientMap Tape::backward(const Tensor& loss) {
  if (loss.tape_ != this || !loss.node_) {
    throw UsageError("backward: loss is not recorded on this tape (detached loss)");
  }
  if (consumed_) throw UsageError("backward: tape already consumed; higher-order gradients are not supported");
  if (loss.numel() != 1) throw UsageError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  consumed_ = true;

  const NodeId root = *loss.node_;
  std::vector<std::vector<double>> grads(root + 1);
  grads[root].assign(1, 1.0);

  GradientMap result;
  for (NodeId id = root + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (node.op == "leaf") {
      std::vector<double> g = grads[id].empty() ? std::vector<double>(shape_numel(node.shape), 0.0)
                                                : std::move(grads[id]);
      result.grads_.emplace(id, Tensor(node.shape, std::move(g)));
      continue;
    }
    if (grads[id].empty()) continue;

    BackwardContext ctx;
    ctx.grad_out = grads[id];
    ctx.grad_in.resize(node.inputs.size());
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      if (!node.inputs[i]) continue;
      auto& buf = grads[*node.inputs[i]];
      if (buf.empty()) buf.assign(shape_numel(nodes_[*node.inputs[i]].shape), 0.0);
      ctx.grad_in[i] = buf;
    }

    if (!g_corrupted_op.empty() && node.op == g_corrupted_op) {
      // Accumulate into scratch buffers, then add a 1% error on the way out.
      std::vector<std::vector<double>> scratch(ctx.grad_in.size());
      std::vector<std::span<double>> real = ctx.grad_in;
      for (std::size_t i = 0; i < real.size(); ++i) {
        if (real[i].empty()) continue;
        scratch[i].assign(real[i].size(), 0.0);
        ctx.grad_in[i] = scratch[i];
      }
      node.backward(ctx);
      for (std::size_t i = 0; i < real.size(); ++i) {
        for (std::size_t j = 0; j < scratch[i].size(); ++j) real[i][j] += 1.01 * scratch[i][j];
      }
    } else {
      node.backward(ctx);
    }
    std::vector<double>().swap(grads[id]);
    node.backward = nullptr;
  }
  // Leaves created after the loss still get a (zero) entry.
  for (NodeId id = root + 1; id < nodes_.size(); ++id) {
    if (nodes_[id].op == "leaf") result.grads_.emplace(id, Tensor::zeros(nodes_[id].shape));
  }
  return result;
}

Tensor make_result(std::string_view op, std::initializer_list<const Tensor*> inputs, Shape shape,
                   std::vector<double> values, BackwardFn backward) {
  return make_result(op, std::span<const Tensor* const>(inputs.begin(), inputs.size()), std::move(shape),
                     std::move(values), std::move(backward));
}

Tensor make_result(std::string_view op, std::span<const Tensor* const> inputs, Shape shape,
                   std::vector<double> values, BackwardFn backward) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite output");
  }
  Tape* tape = nullptr;
  for (const Tensor* in : inputs) {
    if (in->tape() == nullptr) continue;
    if (tape != nullptr && tape != in->tape()) {
      throw UsageError(std::string(op) + ": inputs are attached to different tapes");
    }
    tape = in->tape();
  }
  Tensor out(std::move(shape), std::move(values));
  if (tape == nullptr) return out;
  return tape->record(op, inputs, std::move(out), std::move(backward));
}

namespace debug {

ScopedCorruptBackward::ScopedCorruptBackward(std::string op) : previous_(g_corrupted_op) {
  g_corrupted_op = std::move(op);
}

ScopedCorruptBackward::~ScopedCorruptBackward() { g_corrupted_op = previous_; }

const std::string& corrupted_op() { return g_corrupted_op; }

}  // namespace debug

}  // namespace spn::ad
