// SPDX-License-Identifier: Apache-2.0
#include "spn/nn/params.hpp"

#include "spn/autodiff/tape.hpp"
#include "spn/util/errors.hpp"

namespace spn::nn {

std::size_t ParamStore::add(std::string name, ad::Tensor value, bool trainable) {
  for (const Parameter& p : entries_) {
    if (p.name == name) throw UsageError("param store: duplicate name '" + name + "'");
  }
  entries_.push_back(Parameter{std::move(name), value.detached(), trainable});
  return entries_.size() - 1;
}

std::size_t ParamStore::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  throw UsageError("param store: no parameter named '" + std::string(name) + "'");
}

std::vector<ad::Tensor> ParamStore::bind(ad::Tape* tape) const {
  std::vector<ad::Tensor> out;
  out.reserve(entries_.size());
  for (const Parameter& p : entries_) {
    out.push_back(tape != nullptr && p.trainable ? tape->watch(p.value) : p.value);
  }
  return out;
}

}  // namespace spn::nn
