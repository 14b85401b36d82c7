// SPDX-License-Identifier: Apache-2.0
#include "spn/data/folds.hpp"

#include <algorithm>
#include <map>

#include "spn/util/errors.hpp"
#include "spn/util/rng.hpp"

namespace spn::data {

FoldPlan make_folds(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  const std::size_t n = labels.size();
  if (k < 1 || k > n) {
    throw UsageError("make_folds: k = " + std::to_string(k) + " must lie in [1, " + std::to_string(n) + "]");
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);

  FoldPlan plan;
  plan.folds.resize(k);
  Rng rng(Rng::derive(seed, "folds"));
  std::size_t next = 0;
  for (auto& [label, members] : by_class) {
    if (members.size() < k) {
      plan.warnings.push_back("class " + std::to_string(label) + " has " + std::to_string(members.size()) +
                              " members, fewer than " + std::to_string(k) + " folds; not stratified");
    }
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t idx : members) {
      plan.folds[next].push_back(idx);
      next = (next + 1) % k;
    }
  }
  for (auto& fold : plan.folds) std::sort(fold.begin(), fold.end());
  return plan;
}

}  // namespace spn::data
