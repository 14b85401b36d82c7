// SPDX-License-Identifier: Apache-2.0
#include "spn/nn/layers.hpp"

#include <cmath>
#include <string>

#include "spn/autodiff/ops.hpp"
#include "spn/autodiff/tape.hpp"
#include "spn/util/errors.hpp"

namespace spn::nn {

using ad::BackwardContext;
using ad::shape_str;

namespace {

// y[w] += k0 x[w-1] + k1 x[w] + k2 x[w+1] with zeros outside [0, n).
void conv3_accumulate(double* y, const double* x, std::size_t n, double k0, double k1, double k2) {
  if (n == 1) {
    y[0] += k1 * x[0];
    return;
  }
  y[0] += k1 * x[0] + k2 * x[1];
  for (std::size_t w = 1; w + 1 < n; ++w) y[w] += k0 * x[w - 1] + k1 * x[w] + k2 * x[w + 1];
  y[n - 1] += k0 * x[n - 2] + k1 * x[n - 1];
}

// Sum of a[w] * b[w + shift] over the overlapping range, shift in {-1, 0, 1}.
// Four fixed lanes keep the result independent of vectorization.
double shifted_dot(const double* a, const double* b, std::size_t n, int shift) {
  const std::size_t lo = shift < 0 ? 1 : 0;
  const std::size_t hi = shift > 0 ? n - 1 : n;
  const double* bs = b + shift;
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t w = lo;
  for (; w + 4 <= hi; w += 4) {
    for (std::size_t j = 0; j < 4; ++j) lane[j] += a[w + j] * bs[w + j];
  }
  for (; w < hi; ++w) lane[0] += a[w] * bs[w];
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

}  // namespace

Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  if (input.rank() != 3 || kernels.rank() != 3 || bias.rank() != 1 || kernels.dim(2) != kConvKernel ||
      kernels.dim(1) != input.dim(1) || bias.dim(0) != kernels.dim(0)) {
    throw ShapeError("conv1d: incompatible input " + shape_str(input.shape()) + ", kernels " +
                     shape_str(kernels.shape()) + ", bias " + shape_str(bias.shape()));
  }
  const std::size_t batch = input.dim(0), cin = input.dim(1), width = input.dim(2);
  const std::size_t cout = kernels.dim(0);
  std::vector<double> out(batch * cout * width);
  auto x = input.values();
  auto k = kernels.values();

  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      double* y = out.data() + (b * cout + co) * width;
      for (std::size_t w = 0; w < width; ++w) y[w] = bias[co];
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const std::size_t kb = (co * cin + ci) * 3;
        conv3_accumulate(y, x.data() + (b * cin + ci) * width, width, k[kb], k[kb + 1], k[kb + 2]);
      }
    }
  }

  return ad::make_result(
      "conv1d", {&input, &kernels, &bias}, {batch, cout, width}, std::move(out),
      [input, kernels, batch, cin, cout, width](BackwardContext& ctx) {
        auto x = input.values();
        auto k = kernels.values();
        const auto& g = ctx.grad_out;
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t co = 0; co < cout; ++co) {
            const double* gr = g.data() + (b * cout + co) * width;
            if (ctx.needs(2)) {
              double acc = 0.0;
              for (std::size_t w = 0; w < width; ++w) acc += gr[w];
              ctx.grad_in[2][co] += acc;
            }
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const std::size_t kb = (co * cin + ci) * 3;
              if (ctx.needs(0)) {
                // The adjoint of a correlation is the correlation with the flipped kernel.
                double* dx = ctx.grad_in[0].data() + (b * cin + ci) * width;
                conv3_accumulate(dx, gr, width, k[kb + 2], k[kb + 1], k[kb]);
              }
              if (ctx.needs(1)) {
                const double* xr = x.data() + (b * cin + ci) * width;
                ctx.grad_in[1][kb] += shifted_dot(gr, xr, width, -1);
                ctx.grad_in[1][kb + 1] += shifted_dot(gr, xr, width, 0);
                ctx.grad_in[1][kb + 2] += shifted_dot(gr, xr, width, 1);
              }
            }
          }
        }
      });
}

Tensor batchnorm1d(const Tensor& input, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                   Tensor& running_var, BatchNormMode mode, const BatchNormOptions& options) {
  if (input.rank() != 3) throw ShapeError("batchnorm1d: expected [B, C, W], got " + shape_str(input.shape()));
  const std::size_t batch = input.dim(0), channels = input.dim(1), width = input.dim(2);
  const ad::Shape cshape{channels};
  if (gamma.shape() != cshape || beta.shape() != cshape || running_mean.shape() != cshape ||
      running_var.shape() != cshape) {
    throw ShapeError("batchnorm1d: per-channel tensors must have shape " + shape_str(cshape) + " for input " +
                     shape_str(input.shape()));
  }
  const std::size_t count = batch * width;
  auto x = input.values();
  std::vector<double> out(input.numel());

  if (mode == BatchNormMode::eval) {
    std::vector<double> inv_std(channels);
    for (std::size_t c = 0; c < channels; ++c) {
      if (!(running_var[c] > 0.0)) throw NumericError("batchnorm1d: running variance must be positive");
      inv_std[c] = 1.0 / std::sqrt(running_var[c] + options.epsilon);
    }
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t base = (b * channels + c) * width;
        const double m = running_mean[c], s = inv_std[c] * gamma[c], sh = beta[c];
        for (std::size_t w = 0; w < width; ++w) out[base + w] = (x[base + w] - m) * s + sh;
      }
    Tensor rm = running_mean;
    return ad::make_result(
        "batchnorm1d_eval", {&input, &gamma, &beta}, input.shape(), std::move(out),
        [input, gamma, rm, inv_std, batch, channels, width](BackwardContext& ctx) {
          auto x = input.values();
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t c = 0; c < channels; ++c) {
              const std::size_t base = (b * channels + c) * width;
              for (std::size_t w = 0; w < width; ++w) {
                const double g = ctx.grad_out[base + w];
                const double xhat = (x[base + w] - rm[c]) * inv_std[c];
                if (ctx.needs(0)) ctx.grad_in[0][base + w] += g * gamma[c] * inv_std[c];
                if (ctx.needs(1)) ctx.grad_in[1][c] += g * xhat;
                if (ctx.needs(2)) ctx.grad_in[2][c] += g;
              }
            }
        });
  }

  if (count < 2) {
    throw UsageError("batchnorm1d: train mode needs at least 2 values per channel, got B*W = " +
                     std::to_string(count));
  }
  std::vector<double> mean(channels, 0.0), var(channels, 0.0), inv_std(channels);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c) {
      const double* xr = x.data() + (b * channels + c) * width;
      for (std::size_t w = 0; w < width; ++w) mean[c] += xr[w];
    }
  for (double& m : mean) m /= static_cast<double>(count);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c) {
      const double* xr = x.data() + (b * channels + c) * width;
      for (std::size_t w = 0; w < width; ++w) var[c] += (xr[w] - mean[c]) * (xr[w] - mean[c]);
    }
  for (double& v : var) v /= static_cast<double>(count);
  for (std::size_t c = 0; c < channels; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + options.epsilon);

  std::vector<double> xhat(input.numel());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t base = (b * channels + c) * width;
      for (std::size_t w = 0; w < width; ++w) {
        xhat[base + w] = (x[base + w] - mean[c]) * inv_std[c];
        out[base + w] = xhat[base + w] * gamma[c] + beta[c];
      }
    }

  {
    auto& rm = running_mean.mutable_values();
    auto& rv = running_var.mutable_values();
    const double unbias = static_cast<double>(count) / static_cast<double>(count - 1);
    for (std::size_t c = 0; c < channels; ++c) {
      rm[c] = (1.0 - options.momentum) * rm[c] + options.momentum * mean[c];
      rv[c] = (1.0 - options.momentum) * rv[c] + options.momentum * var[c] * unbias;
    }
  }

  return ad::make_result(
      "batchnorm1d", {&input, &gamma, &beta}, input.shape(), std::move(out),
      [gamma, xhat = std::move(xhat), inv_std, batch, channels, width, count](BackwardContext& ctx) {
        const auto& g = ctx.grad_out;
        std::vector<double> sum_g(channels, 0.0), sum_gx(channels, 0.0);
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t base = (b * channels + c) * width;
            for (std::size_t w = 0; w < width; ++w) {
              sum_g[c] += g[base + w];
              sum_gx[c] += g[base + w] * xhat[base + w];
            }
          }
        for (std::size_t c = 0; c < channels; ++c) {
          if (ctx.needs(1)) ctx.grad_in[1][c] += sum_gx[c];
          if (ctx.needs(2)) ctx.grad_in[2][c] += sum_g[c];
        }
        if (!ctx.needs(0)) return;
        const double n = static_cast<double>(count);
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t base = (b * channels + c) * width;
            const double scale = gamma[c] * inv_std[c] / n;
            for (std::size_t w = 0; w < width; ++w) {
              ctx.grad_in[0][base + w] += scale * (n * g[base + w] - sum_g[c] - xhat[base + w] * sum_gx[c]);
            }
          }
      });
}

Tensor maxpool1d(const Tensor& input) {
  if (input.rank() != 3 || input.dim(2) < kPoolKernel) {
    throw ShapeError("maxpool1d: expected [B, C, W] with W >= 3, got " + shape_str(input.shape()));
  }
  const std::size_t rows = input.dim(0) * input.dim(1), width = input.dim(2), pooled = width / kPoolKernel;
  std::vector<double> out(rows * pooled);
  std::vector<std::size_t> arg(out.size());
  auto x = input.values();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t p = 0; p < pooled; ++p) {
      const std::size_t start = r * width + p * kPoolKernel;
      std::size_t best = start;
      for (std::size_t j = 1; j < kPoolKernel; ++j) {
        if (x[start + j] > x[best]) best = start + j;
      }
      out[r * pooled + p] = x[best];
      arg[r * pooled + p] = best;
    }
  return ad::make_result("maxpool1d", {&input}, {input.dim(0), input.dim(1), pooled}, std::move(out),
                         [arg = std::move(arg)](BackwardContext& ctx) {
                           for (std::size_t j = 0; j < arg.size(); ++j) ctx.grad_in[0][arg[j]] += ctx.grad_out[j];
                         });
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() != 2 || weight.rank() != 2 || bias.rank() != 1 || input.dim(1) != weight.dim(0) ||
      bias.dim(0) != weight.dim(1)) {
    throw ShapeError("linear: incompatible input " + shape_str(input.shape()) + ", weight " +
                     shape_str(weight.shape()) + ", bias " + shape_str(bias.shape()));
  }
  Tensor y = ad::matmul(input, weight);
  return y + ad::broadcast(bias, y.shape());
}

LstmState lstm_cell(const Tensor& x, const LstmState& prev, const LstmWeights& weights) {
  if (x.rank() != 2 || prev.h.rank() != 2 || prev.c.shape() != prev.h.shape() || weights.w_ih.rank() != 2 ||
      weights.w_hh.rank() != 2) {
    throw ShapeError("lstm_cell: expected x [B, D], h/c [B, H]; got x " + shape_str(x.shape()) + ", h " +
                     shape_str(prev.h.shape()) + ", c " + shape_str(prev.c.shape()));
  }
  const std::size_t batch = x.dim(0), hidden = prev.h.dim(1);
  if (prev.h.dim(0) != batch || weights.w_ih.shape() != ad::Shape{4 * hidden, x.dim(1)} ||
      weights.w_hh.shape() != ad::Shape{4 * hidden, hidden} || weights.bias.shape() != ad::Shape{4 * hidden}) {
    throw ShapeError("lstm_cell: weights w_ih " + shape_str(weights.w_ih.shape()) + ", w_hh " +
                     shape_str(weights.w_hh.shape()) + ", bias " + shape_str(weights.bias.shape()) +
                     " do not fit x " + shape_str(x.shape()) + " and h " + shape_str(prev.h.shape()));
  }
  Tensor gates = ad::matmul(x, ad::transpose(weights.w_ih)) + ad::matmul(prev.h, ad::transpose(weights.w_hh));
  gates = gates + ad::broadcast(weights.bias, gates.shape());
  Tensor i = ad::sigmoid(ad::slice(gates, 1, 0, hidden));
  Tensor f = ad::sigmoid(ad::slice(gates, 1, hidden, 2 * hidden));
  Tensor g = ad::tanh(ad::slice(gates, 1, 2 * hidden, 3 * hidden));
  Tensor o = ad::sigmoid(ad::slice(gates, 1, 3 * hidden, 4 * hidden));
  Tensor c = f * prev.c + i * g;
  Tensor h = o * ad::tanh(c);
  return {h, c};
}

}  // namespace spn::nn
