// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spn/autodiff/tensor.hpp"

namespace spn::nn {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moments mirror the parameter list they were first used with.
struct AdamState {
  AdamOptions options;
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
  std::uint64_t step = 0;
};

/// Bias-corrected Adam update of `params` in place. Any non-finite gradient
/// aborts the whole update (NumericError) before anything is modified.
void adam_step(std::span<ad::Tensor* const> params, std::span<const ad::Tensor> grads, AdamState& state,
               double lr);

/// Scales `grads` so their joint L2 norm is at most `max_norm`; returns the
/// norm before clipping.
double clip_global_norm(std::span<ad::Tensor> grads, double max_norm);

struct StepSchedule {
  double base_lr = 1e-3;
  double divisor = 5.0;
  int every_epochs = 20;
};

/// base_lr / divisor^floor(epoch / every_epochs).
double lr_schedule(int epoch, const StepSchedule& schedule = {});

}  // namespace spn::nn
