// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "spn/autodiff/tensor.hpp"

namespace spn::nn {

using ad::Tensor;

/// Kernel width, padding and stride of every convolution in the backbone.
inline constexpr std::size_t kConvKernel = 3;
inline constexpr std::size_t kPoolKernel = 3;

/// input [B, C_in, W], kernels [C_out, C_in, 3], bias [C_out] -> [B, C_out, W].
/// Zero padding of 1 and stride 1 keep the width unchanged.
Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias);

enum class BatchNormMode { train, eval };

struct BatchNormOptions {
  double momentum = 0.1;
  double epsilon = 1e-5;
};

/// Per-channel normalization of [B, C, W].
///
/// Train mode normalizes with the batch mean and biased variance over B*W
/// positions and blends the batch mean / unbiased variance into the running
/// statistics. Eval mode uses the running statistics and leaves them alone.
Tensor batchnorm1d(const Tensor& input, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                   Tensor& running_var, BatchNormMode mode, const BatchNormOptions& options = {});

/// Non-overlapping max pool, kernel 3 / stride 3: [B, C, W] -> [B, C, W/3].
/// Trailing samples that do not fill a window are dropped.
Tensor maxpool1d(const Tensor& input);

/// input [B, D], W [D, K], b [K] -> [B, K].
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

struct LstmWeights {
  Tensor w_ih;  // [4H, D]
  Tensor w_hh;  // [4H, H]
  Tensor bias;  // [4H], gate order input, forget, cell, output
};

struct LstmState {
  Tensor h;  // [B, H]
  Tensor c;  // [B, H]
};

LstmState lstm_cell(const Tensor& x, const LstmState& prev, const LstmWeights& weights);

}  // namespace spn::nn
