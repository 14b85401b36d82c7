// SPDX-License-Identifier: Apache-2.0
#include "spn/autodiff/ops.hpp"

#include <cmath>
#include <string>

#include "spn/autodiff/tape.hpp"
#include "spn/util/errors.hpp"

namespace spn::ad {

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void require_axis(const char* op, const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                     shape_str(x.shape()));
  }
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  return out;
}

// Elementwise unary op whose derivative is expressed through input x and output y.
template <class Fwd, class Deriv>
Tensor unary(const char* op, const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.numel());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  Tensor result = make_result(op, {&x}, x.shape(), out, [x, deriv, out](BackwardContext& ctx) {
    auto xv = x.values();
    for (std::size_t i = 0; i < ctx.grad_out.size(); ++i) {
      ctx.grad_in[0][i] += ctx.grad_out[i] * deriv(xv[i], out[i]);
    }
  });
  return result;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return make_result("add", {&a, &b}, a.shape(), std::move(out), [](BackwardContext& ctx) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (!ctx.needs(k)) continue;
      for (std::size_t i = 0; i < ctx.grad_out.size(); ++i) ctx.grad_in[k][i] += ctx.grad_out[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return make_result("sub", {&a, &b}, a.shape(), std::move(out), [](BackwardContext& ctx) {
    for (std::size_t i = 0; i < ctx.grad_out.size(); ++i) {
      if (ctx.needs(0)) ctx.grad_in[0][i] += ctx.grad_out[i];
      if (ctx.needs(1)) ctx.grad_in[1][i] -= ctx.grad_out[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return make_result("mul", {&a, &b}, a.shape(), std::move(out), [a, b](BackwardContext& ctx) {
    for (std::size_t i = 0; i < ctx.grad_out.size(); ++i) {
      if (ctx.needs(0)) ctx.grad_in[0][i] += ctx.grad_out[i] * b[i];
      if (ctx.needs(1)) ctx.grad_in[1][i] += ctx.grad_out[i] * a[i];
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape("div", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] / (b[i] + kLogDivEpsilon);
  return make_result("div", {&a, &b}, a.shape(), std::move(out), [a, b](BackwardContext& ctx) {
    for (std::size_t i = 0; i < ctx.grad_out.size(); ++i) {
      const double denom = b[i] + kLogDivEpsilon;
      if (ctx.needs(0)) ctx.grad_in[0][i] += ctx.grad_out[i] / denom;
      if (ctx.needs(1)) ctx.grad_in[1][i] -= ctx.grad_out[i] * a[i] / (denom * denom);
    }
  });
}

Tensor neg(const Tensor& x) {
  return unary("neg", x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      "scale", x, [factor](double v) { return factor * v; }, [factor](double, double) { return factor; });
}

Tensor exp(const Tensor& x) {
  return unary("exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  for (double v : x.values()) {
    if (v < 0.0 || std::isnan(v)) throw NumericError("log: negative input " + std::to_string(v));
  }
  return unary(
      "log", x, [](double v) { return std::log(v + kLogDivEpsilon); },
      [](double v, double) { return 1.0 / (v + kLogDivEpsilon); });
}

Tensor tanh(const Tensor& x) {
  return unary("tanh", x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        // Branches keep exp() from overflowing for large |v|.
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: cannot multiply " + shape_str(a.shape()) + " by " + shape_str(b.shape()));
  }
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  std::vector<double> out(n * m, 0.0);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      const double* brow = bv.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += aip * brow[j];
    }
  }
  return make_result("matmul", {&a, &b}, {n, m}, std::move(out), [a, b, n, k, m](BackwardContext& ctx) {
    auto av = a.values();
    auto bv = b.values();
    const auto& g = ctx.grad_out;
    if (ctx.needs(0)) {
      // dA = G B^T
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += g[i * m + j] * bv[p * m + j];
          ctx.grad_in[0][i * k + p] += acc;
        }
      }
    }
    if (ctx.needs(1)) {
      // dB = A^T G
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          double* dst = ctx.grad_in[1].data() + p * m;
          for (std::size_t j = 0; j < m; ++j) dst[j] += aip * g[i * m + j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + shape_str(x.shape()));
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
  return make_result("transpose", {&x}, {c, r}, std::move(out), [r, c](BackwardContext& ctx) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ctx.grad_in[0][i * c + j] += ctx.grad_out[j * r + i];
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  return make_result("sum", {&x}, {}, {total}, [](BackwardContext& ctx) {
    const double g = ctx.grad_out[0];
    for (double& d : ctx.grad_in[0]) d += g;
  });
}

Tensor sum(const Tensor& x, std::size_t axis) {
  require_axis("sum", x, axis);
  const AxisSplit s = split_at(x.shape(), axis);
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t e = 0; e < s.extent; ++e)
      for (std::size_t i = 0; i < s.inner; ++i) out[o * s.inner + i] += x[(o * s.extent + e) * s.inner + i];
  return make_result("sum_axis", {&x}, drop_axis(x.shape(), axis), std::move(out), [s](BackwardContext& ctx) {
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t e = 0; e < s.extent; ++e)
        for (std::size_t i = 0; i < s.inner; ++i)
          ctx.grad_in[0][(o * s.extent + e) * s.inner + i] += ctx.grad_out[o * s.inner + i];
  });
}

Tensor mean(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  const double n = static_cast<double>(x.numel());
  return make_result("mean", {&x}, {}, {total / n}, [n](BackwardContext& ctx) {
    const double g = ctx.grad_out[0] / n;
    for (double& d : ctx.grad_in[0]) d += g;
  });
}

Tensor max_over_axis(const Tensor& x, std::size_t axis) {
  require_axis("max_over_axis", x, axis);
  const AxisSplit s = split_at(x.shape(), axis);
  std::vector<double> out(s.outer * s.inner);
  std::vector<std::size_t> arg(out.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      std::size_t best = 0;
      double best_v = x[o * s.extent * s.inner + i];
      for (std::size_t e = 1; e < s.extent; ++e) {
        const double v = x[(o * s.extent + e) * s.inner + i];
        if (v > best_v) {
          best_v = v;
          best = e;
        }
      }
      out[o * s.inner + i] = best_v;
      arg[o * s.inner + i] = (o * s.extent + best) * s.inner + i;
    }
  }
  return make_result("max_over_axis", {&x}, drop_axis(x.shape(), axis), std::move(out),
                     [arg = std::move(arg)](BackwardContext& ctx) {
                       for (std::size_t j = 0; j < arg.size(); ++j) ctx.grad_in[0][arg[j]] += ctx.grad_out[j];
                     });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  require_axis("concat", parts[0], axis);
  Shape shape = parts[0].shape();
  std::vector<std::size_t> extents;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    Shape a = p.shape(), b = shape;
    if (a.size() != b.size()) {
      throw ShapeError("concat: rank mismatch " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    }
    a[axis] = b[axis] = 0;
    if (a != b) {
      throw ShapeError("concat: shape mismatch " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    }
    extents.push_back(p.dim(axis));
    total += p.dim(axis);
  }
  shape[axis] = total;
  const AxisSplit s = split_at(shape, axis);
  std::vector<double> out(shape_numel(shape));
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::size_t ext = extents[k];
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t e = 0; e < ext; ++e)
        for (std::size_t i = 0; i < s.inner; ++i)
          out[(o * total + offset + e) * s.inner + i] = parts[k][(o * ext + e) * s.inner + i];
    offset += ext;
  }
  std::vector<const Tensor*> inputs;
  for (const Tensor& p : parts) inputs.push_back(&p);
  return make_result("concat", inputs, shape, std::move(out), [s, extents, total](BackwardContext& ctx) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < extents.size(); ++k) {
      const std::size_t ext = extents[k];
      if (ctx.needs(k)) {
        for (std::size_t o = 0; o < s.outer; ++o)
          for (std::size_t e = 0; e < ext; ++e)
            for (std::size_t i = 0; i < s.inner; ++i)
              ctx.grad_in[k][(o * ext + e) * s.inner + i] += ctx.grad_out[(o * total + offset + e) * s.inner + i];
      }
      offset += ext;
    }
  });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  require_axis("slice", x, axis);
  if (begin >= end || end > x.dim(axis)) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for axis " + std::to_string(axis) + " of shape " + shape_str(x.shape()));
  }
  const AxisSplit s = split_at(x.shape(), axis);
  const std::size_t len = end - begin;
  Shape shape = x.shape();
  shape[axis] = len;
  std::vector<double> out(shape_numel(shape));
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t e = 0; e < len; ++e)
      for (std::size_t i = 0; i < s.inner; ++i)
        out[(o * len + e) * s.inner + i] = x[(o * s.extent + begin + e) * s.inner + i];
  return make_result("slice", {&x}, shape, std::move(out), [s, len, begin](BackwardContext& ctx) {
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t e = 0; e < len; ++e)
        for (std::size_t i = 0; i < s.inner; ++i)
          ctx.grad_in[0][(o * s.extent + begin + e) * s.inner + i] += ctx.grad_out[(o * len + e) * s.inner + i];
  });
}

Tensor broadcast(const Tensor& x, const Shape& shape) {
  if (x.rank() > shape.size()) {
    throw ShapeError("broadcast: cannot broadcast " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  const std::size_t lead = shape.size() - x.rank();
  // Stride of each target axis in the source (0 for broadcast axes).
  std::vector<std::size_t> src_stride(shape.size(), 0);
  std::size_t stride = 1;
  for (std::size_t i = shape.size(); i-- > lead;) {
    const std::size_t src_extent = x.dim(i - lead);
    if (src_extent != shape[i] && src_extent != 1) {
      throw ShapeError("broadcast: cannot broadcast " + shape_str(x.shape()) + " to " + shape_str(shape));
    }
    src_stride[i] = src_extent == 1 ? 0 : stride;
    stride *= src_extent;
  }
  const std::size_t n = shape_numel(shape);
  std::vector<std::size_t> src_index(n);
  std::vector<std::size_t> counter(shape.size(), 0);
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t idx = 0;
    for (std::size_t a = 0; a < shape.size(); ++a) idx += counter[a] * src_stride[a];
    src_index[j] = idx;
    for (std::size_t a = shape.size(); a-- > 0;) {
      if (++counter[a] < shape[a]) break;
      counter[a] = 0;
    }
  }
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = x[src_index[j]];
  return make_result("broadcast", {&x}, shape, std::move(out), [src_index = std::move(src_index)](BackwardContext& ctx) {
    for (std::size_t j = 0; j < src_index.size(); ++j) ctx.grad_in[0][src_index[j]] += ctx.grad_out[j];
  });
}

Tensor reshape(const Tensor& x, const Shape& shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return make_result("reshape", {&x}, shape, std::move(out), [](BackwardContext& ctx) {
    for (std::size_t i = 0; i < ctx.grad_out.size(); ++i) ctx.grad_in[0][i] += ctx.grad_out[i];
  });
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax_rows: expected [B, K], got " + shape_str(logits.shape()));
  // Subtracting the row max is gradient-neutral and keeps exp() in range.
  Tensor peak = broadcast(reshape(max_over_axis(logits, 1), {logits.dim(0), 1}), logits.shape());
  Tensor e = exp(logits - peak);
  Tensor total = broadcast(reshape(sum(e, 1), {logits.dim(0), 1}), logits.shape());
  return e / total;
}

}  // namespace spn::ad
