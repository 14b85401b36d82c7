// SPDX-License-Identifier: Apache-2.0
#include "spn/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "spn/autodiff/tape.hpp"
#include "spn/util/errors.hpp"

namespace spn::ad {

std::string CheckReport::describe() const {
  std::ostringstream out;
  if (aborted) {
    out << "aborted: " << diagnostic;
    return out.str();
  }
  out << (passed ? "pass" : "FAIL") << " max_rel_err=" << max_rel_err;
  if (!passed) {
    out << " at input " << worst.input << " coordinate " << worst.index << " (tape " << worst.analytic
        << ", finite difference " << worst.numeric << ")";
  }
  return out.str();
}

CheckReport grad_check(const MultiScalarFn& f, std::vector<Tensor> inputs, const CheckOptions& options) {
  if (!(options.step >= 1e-7 && options.step <= 1e-3)) {
    throw UsageError("grad_check: step must lie in [1e-7, 1e-3]");
  }
  CheckReport report;
  for (Tensor& in : inputs) in = in.detached();

  auto evaluate = [&](std::span<const Tensor> xs) {
    Tensor y = f(xs);
    if (y.numel() != 1) throw UsageError("grad_check: function must return a scalar");
    return y.item();
  };

  const double first = evaluate(inputs);
  const double second = evaluate(inputs);
  if (std::memcmp(&first, &second, sizeof(double)) != 0) {
    report.aborted = true;
    std::ostringstream msg;
    msg.precision(17);
    msg << "function is not deterministic: two evaluations gave " << first << " and " << second;
    report.diagnostic = msg.str();
    return report;
  }

  Tape tape;
  std::vector<Tensor> watched;
  watched.reserve(inputs.size());
  for (const Tensor& in : inputs) watched.push_back(tape.watch(in));
  Tensor y = f(watched);
  if (y.tape() != &tape) {
    // Output does not depend on any input: every gradient is zero.
    y = make_result("grad_check_anchor", {&watched[0], &y}, {}, {y.item()}, [](BackwardContext&) {});
  }
  GradientMap grads = tape.backward(y);

  report.passed = true;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor& analytic = grads[watched[k]];
    for (std::size_t i = 0; i < inputs[k].numel(); ++i) {
      std::vector<Tensor> probe = inputs;
      const double x0 = inputs[k][i];
      probe[k].mutable_values()[i] = x0 + options.step;
      const double plus = evaluate(probe);
      probe[k].mutable_values()[i] = x0 - options.step;
      const double minus = evaluate(probe);
      const double numeric = (plus - minus) / (2.0 * options.step);

      CoordinateError c{k, i, analytic[i], numeric, 0.0};
      const double denom = std::max({std::abs(c.analytic), std::abs(c.numeric), options.denominator_floor});
      c.rel_err = std::abs(c.analytic - c.numeric) / denom;
      if (!std::isfinite(c.rel_err)) c.rel_err = std::numeric_limits<double>::infinity();
      if (report.coordinates.empty() || c.rel_err > report.max_rel_err) {
        report.max_rel_err = c.rel_err;
        report.worst = c;
      }
      report.coordinates.push_back(c);
    }
  }
  report.passed = report.max_rel_err < options.tolerance;
  return report;
}

CheckReport grad_check(const ScalarFn& f, const Tensor& x, const CheckOptions& options) {
  return grad_check([&f](std::span<const Tensor> xs) { return f(xs[0]); }, std::vector<Tensor>{x}, options);
}

}  // namespace spn::ad
