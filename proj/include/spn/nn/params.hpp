// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "spn/autodiff/tensor.hpp"

namespace spn::ad {
class Tape;
}

namespace spn::nn {

struct Parameter {
  std::string name;
  ad::Tensor value;
  // Buffers (batch-norm running statistics) are saved with the model but
  // never receive gradients.
  bool trainable = true;
};

/// Ordered, named collection of model tensors. Order is insertion order and is
/// the order used by checkpoints and optimizers.
class ParamStore {
 public:
  std::size_t add(std::string name, ad::Tensor value, bool trainable = true);
  std::size_t index_of(std::string_view name) const;

  Parameter& at(std::size_t i) { return entries_.at(i); }
  const Parameter& at(std::size_t i) const { return entries_.at(i); }
  std::size_t size() const { return entries_.size(); }
  std::vector<Parameter>& entries() { return entries_; }
  const std::vector<Parameter>& entries() const { return entries_; }

  /// Tensors for one forward pass: trainable entries are watched on `tape`
  /// (when given), buffers are passed through as constants.
  std::vector<ad::Tensor> bind(ad::Tape* tape) const;

 private:
  std::vector<Parameter> entries_;
};

}  // namespace spn::nn
