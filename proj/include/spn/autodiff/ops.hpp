// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "spn/autodiff/tensor.hpp"

namespace spn::ad {

/// Added inside log() and to div() denominators.
inline constexpr double kLogDivEpsilon = 1e-12;

// Elementwise binary ops require identical shapes; use broadcast() first.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor exp(const Tensor& x);
/// log(x + kLogDivEpsilon); negative inputs are a numeric error.
Tensor log(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);

/// [n, k] x [k, m] -> [n, m]
Tensor matmul(const Tensor& a, const Tensor& b);
/// Rank-2 transpose.
Tensor transpose(const Tensor& x);

/// Sum of all elements as a scalar.
Tensor sum(const Tensor& x);
/// Sum over one axis; the axis is removed.
Tensor sum(const Tensor& x, std::size_t axis);
Tensor mean(const Tensor& x);
/// Max over one axis (removed). Backward routes to the first maximal index.
Tensor max_over_axis(const Tensor& x, std::size_t axis);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
/// Elements [begin, end) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
/// Numpy-style broadcast of `x` to `shape` (trailing axes aligned).
Tensor broadcast(const Tensor& x, const Shape& shape);
Tensor reshape(const Tensor& x, const Shape& shape);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& x) { return neg(x); }

// Composites.

/// Row-wise softmax of a [B, K] tensor.
Tensor softmax_rows(const Tensor& logits);

}  // namespace spn::ad
