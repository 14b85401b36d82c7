// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace spn::app {

struct GradCheckRow {
  std::string name;
  bool passed = false;
  double max_rel_err = 0.0;
  std::string detail;  // worst coordinate or abort diagnostic
};

/// Finite-difference checks of every layer, a 3-step unrolled backbone with
/// both heads, and the episode loss through a taped rollout, at tolerance
/// 1e-4. A non-empty `corrupt_op` perturbs that primitive's backward rule
/// for the duration of the suite.
std::vector<GradCheckRow> run_gradcheck_suite(const std::string& corrupt_op = "");

/// check,max_rel_err,status lines with a header.
std::string format_gradcheck(const std::vector<GradCheckRow>& rows);

}  // namespace spn::app
