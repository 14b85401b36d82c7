// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "spn/autodiff/tensor.hpp"

namespace spn::ad {

struct CheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Lower bound of the relative-error denominator, so coordinates whose true
  // gradient is ~0 are judged on absolute error.
  double denominator_floor = 1e-6;
};

struct CoordinateError {
  std::size_t input = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct CheckReport {
  bool passed = false;
  bool aborted = false;
  std::string diagnostic;
  double max_rel_err = 0.0;
  CoordinateError worst;
  std::vector<CoordinateError> coordinates;

  std::string describe() const;
};

using MultiScalarFn = std::function<Tensor(std::span<const Tensor>)>;
using ScalarFn = std::function<Tensor(const Tensor&)>;

/// Compares tape gradients of a scalar function against central differences
/// for every coordinate of every input.
CheckReport grad_check(const MultiScalarFn& f, std::vector<Tensor> inputs,
                       const CheckOptions& options = {});
CheckReport grad_check(const ScalarFn& f, const Tensor& x, const CheckOptions& options = {});

}  // namespace spn::ad
