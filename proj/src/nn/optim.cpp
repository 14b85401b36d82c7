// SPDX-License-Identifier: Apache-2.0
#include "spn/nn/optim.hpp"

#include <cmath>
#include <string>

#include "spn/util/errors.hpp"

namespace spn::nn {

void adam_step(std::span<ad::Tensor* const> params, std::span<const ad::Tensor> grads, AdamState& state,
               double lr) {
  if (params.size() != grads.size()) throw UsageError("adam_step: parameter and gradient counts differ");
  if (!(lr >= 0.0)) throw UsageError("adam_step: learning rate must be non-negative");
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (params[p]->shape() != grads[p].shape()) {
      throw ShapeError("adam_step: gradient " + ad::shape_str(grads[p].shape()) + " does not match parameter " +
                       ad::shape_str(params[p]->shape()));
    }
    for (double g : grads[p].values()) {
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient for parameter " + std::to_string(p));
    }
  }
  if (state.first.empty()) {
    for (const ad::Tensor* param : params) {
      state.first.emplace_back(param->numel(), 0.0);
      state.second.emplace_back(param->numel(), 0.0);
    }
  }
  if (state.first.size() != params.size()) throw UsageError("adam_step: state was built for a different parameter list");

  ++state.step;
  const AdamOptions& o = state.options;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& values = params[p]->mutable_values();
    auto& m = state.first[p];
    auto& v = state.second[p];
    auto g = grads[p].values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      values[i] -= lr * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

double clip_global_norm(std::span<ad::Tensor> grads, double max_norm) {
  double sq = 0.0;
  for (const ad::Tensor& g : grads)
    for (double v : g.values()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (ad::Tensor& g : grads)
      for (double& v : g.mutable_values()) v *= factor;
  }
  return norm;
}

double lr_schedule(int epoch, const StepSchedule& schedule) {
  if (epoch < 0) throw UsageError("lr_schedule: epoch must be non-negative, got " + std::to_string(epoch));
  return schedule.base_lr / std::pow(schedule.divisor, epoch / schedule.every_epochs);
}

}  // namespace spn::nn
