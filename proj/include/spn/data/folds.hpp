// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace spn::data {

struct FoldPlan {
  std::vector<std::vector<std::size_t>> folds;  // sorted indices per fold
  std::vector<std::string> warnings;
};

/// Stratified k-fold split of [0, labels.size()). Each class is shuffled with
/// `seed` and dealt round-robin, continuing where the previous class stopped,
/// so per-class counts differ by at most one across folds and fold sizes by
/// at most one overall. Classes with fewer than k members produce a warning.
FoldPlan make_folds(std::span<const int> labels, std::size_t k, std::uint64_t seed);

}  // namespace spn::data
