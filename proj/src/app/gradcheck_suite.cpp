// SPDX-License-Identifier: Apache-2.0
#include "spn/app/gradcheck_suite.hpp"

#include <cstdio>
#include <optional>

#include "spn/autodiff/grad_check.hpp"
#include "spn/autodiff/ops.hpp"
#include "spn/autodiff/tape.hpp"
#include "spn/model/agent.hpp"
#include "spn/model/model.hpp"
#include "spn/nn/layers.hpp"
#include "spn/train/train.hpp"
#include "spn/util/rng.hpp"

namespace spn::app {

namespace {

using ad::Tensor;

Tensor random_tensor(Rng& rng, ad::Shape shape, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(ad::shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

// Values in [-1, -0.1] u [0.1, 1], away from the relu kink.
Tensor away_from_zero(Rng& rng, ad::Shape shape) {
  std::vector<double> v(ad::shape_numel(shape));
  for (double& x : v) x = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.1, 1.0);
  return Tensor(std::move(shape), std::move(v));
}

Tensor weighted_sum(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  return ad::sum(y * random_tensor(rng, y.shape()));
}

GradCheckRow to_row(std::string name, const ad::CheckReport& report) {
  GradCheckRow row;
  row.name = std::move(name);
  row.passed = report.passed;
  row.max_rel_err = report.max_rel_err;
  row.detail = report.describe();
  return row;
}

model::ModelConfig tiny_model() {
  model::ModelConfig c;
  c.input_channels = 2;
  c.block_layers = {1, 1};
  c.block_channels = {2, 3};
  c.hidden = 3;
  c.snippet_width = 9;
  c.num_classes = 3;
  c.policy_bias_init = -0.5;
  return c;
}

std::vector<std::size_t> trainable_ids(const model::SpnModel& m) {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    if (m.params().at(i).trainable) ids.push_back(i);
  }
  return ids;
}

std::vector<Tensor> trainable_values(const model::SpnModel& m, const std::vector<std::size_t>& ids) {
  std::vector<Tensor> out;
  for (std::size_t id : ids) out.push_back(m.params().at(id).value);
  return out;
}

std::vector<Tensor> substitute(const model::SpnModel& m, const std::vector<std::size_t>& ids,
                               std::span<const Tensor> values) {
  std::vector<Tensor> bound = m.params().bind(nullptr);
  for (std::size_t i = 0; i < ids.size(); ++i) bound[ids[i]] = values[i];
  return bound;
}

signal::SnippetSeries random_series(Rng& rng, std::size_t steps, int label) {
  signal::SnippetSeries s;
  s.channels = 2;
  s.width = 9;
  s.label = label;
  s.record_id = "check";
  for (std::size_t t = 0; t < steps; ++t) {
    signal::Snippet snip;
    snip.values.resize(18);
    for (double& v : snip.values) v = rng.normal();
    snip.start = 10 * t;
    snip.end = 10 * (t + 1);
    s.snippets.push_back(std::move(snip));
  }
  s.record_length = 10 * steps + 4;
  return s;
}

}  // namespace

std::vector<GradCheckRow> run_gradcheck_suite(const std::string& corrupt_op) {
  std::optional<ad::debug::ScopedCorruptBackward> corrupt;
  if (!corrupt_op.empty()) corrupt.emplace(corrupt_op);

  Rng rng(Rng::derive(20240601, "gradcheck"));
  std::vector<GradCheckRow> rows;

  rows.push_back(to_row("conv1d", ad::grad_check(
                                      [](std::span<const Tensor> in) {
                                        return weighted_sum(nn::conv1d(in[0], in[1], in[2]), 1);
                                      },
                                      {random_tensor(rng, {2, 3, 9}), random_tensor(rng, {4, 3, 3}),
                                       random_tensor(rng, {4})})));

  rows.push_back(to_row("batchnorm1d_train", ad::grad_check(
                                                 [](std::span<const Tensor> in) {
                                                   Tensor rm = Tensor::zeros({3}), rv = Tensor::full({3}, 1.0);
                                                   return weighted_sum(nn::batchnorm1d(in[0], in[1], in[2], rm, rv,
                                                                                       nn::BatchNormMode::train),
                                                                       2);
                                                 },
                                                 {random_tensor(rng, {3, 3, 6}), random_tensor(rng, {3}, 0.5, 1.5),
                                                  random_tensor(rng, {3})})));

  rows.push_back(to_row("batchnorm1d_eval", ad::grad_check(
                                                [](std::span<const Tensor> in) {
                                                  Tensor rm = Tensor::full({3}, 0.2), rv = Tensor::full({3}, 1.5);
                                                  return weighted_sum(nn::batchnorm1d(in[0], in[1], in[2], rm, rv,
                                                                                      nn::BatchNormMode::eval),
                                                                      3);
                                                },
                                                {random_tensor(rng, {2, 3, 6}), random_tensor(rng, {3}),
                                                 random_tensor(rng, {3})})));

  rows.push_back(to_row("relu", ad::grad_check([](const Tensor& x) { return weighted_sum(ad::relu(x), 4); },
                                               away_from_zero(rng, {2, 3, 5}))));

  rows.push_back(to_row("maxpool1d", ad::grad_check([](const Tensor& x) { return weighted_sum(nn::maxpool1d(x), 5); },
                                                    random_tensor(rng, {2, 3, 10}))));

  rows.push_back(to_row("linear", ad::grad_check(
                                      [](std::span<const Tensor> in) {
                                        return weighted_sum(nn::linear(in[0], in[1], in[2]), 6);
                                      },
                                      {random_tensor(rng, {3, 4}), random_tensor(rng, {4, 2}),
                                       random_tensor(rng, {2})})));

  rows.push_back(to_row("lstm_cell", ad::grad_check(
                                         [](std::span<const Tensor> in) {
                                           const nn::LstmState s = nn::lstm_cell(in[0], {in[1], in[2]},
                                                                                 {in[3], in[4], in[5]});
                                           return weighted_sum(s.h, 7) + weighted_sum(s.c, 8);
                                         },
                                         {random_tensor(rng, {2, 3}), random_tensor(rng, {2, 2}),
                                          random_tensor(rng, {2, 2}), random_tensor(rng, {8, 3}),
                                          random_tensor(rng, {8, 2}), random_tensor(rng, {8})})));

  rows.push_back(to_row("policy_head", ad::grad_check(
                                           [](std::span<const Tensor> in) {
                                             const Tensor pi = ad::sigmoid(nn::linear(in[0], in[1], in[2]));
                                             const Tensor a({3, 1}, {1, 0, 1});
                                             const Tensor one = Tensor::full({3, 1}, 1.0);
                                             return ad::sum(a * ad::log(pi) + (one - a) * ad::log(one - pi));
                                           },
                                           {random_tensor(rng, {3, 4}), random_tensor(rng, {4, 1}),
                                            random_tensor(rng, {1})})));

  rows.push_back(to_row("discriminator_head", ad::grad_check(
                                                  [](std::span<const Tensor> in) {
                                                    const Tensor p = ad::softmax_rows(nn::linear(in[0], in[1], in[2]));
                                                    return -ad::sum(ad::log(p) * Tensor({2, 3}, {0, 1, 0, 0, 0, 1}));
                                                  },
                                                  {random_tensor(rng, {2, 4}), random_tensor(rng, {4, 3}),
                                                   random_tensor(rng, {3})})));

  const model::SpnModel net(tiny_model(), Rng::derive(20240601, "gradcheck-model"));
  const std::vector<std::size_t> ids = trainable_ids(net);

  {
    std::vector<Tensor> xs;
    for (int t = 0; t < 3; ++t) xs.push_back(random_tensor(rng, {2, 2, 9}));
    auto unrolled = [&](std::span<const Tensor> values) {
      model::Forward f(net, substitute(net, ids, values), nn::BatchNormMode::train);
      model::BackboneState st = model::initial_state(net.config(), 2);
      Tensor total = Tensor::scalar(0.0);
      for (std::size_t t = 0; t < xs.size(); ++t) {
        st = f.backbone_step(xs[t], st);
        total = total + weighted_sum(f.policy_prob(st.h), 10 + t);
      }
      const Tensor p = f.class_probs(st.h);
      return total + weighted_sum(st.h, 20) - ad::sum(ad::log(p) * Tensor({2, 3}, {1, 0, 0, 0, 0, 1}));
    };
    rows.push_back(to_row("rollout_3_steps", ad::grad_check(unrolled, trainable_values(net, ids))));
  }

  {
    const std::vector<signal::SnippetSeries> episodes{random_series(rng, 3, 1), random_series(rng, 2, 2)};
    auto taped_loss = [&](std::span<const Tensor> values) {
      model::Forward f(net, substitute(net, ids, values), nn::BatchNormMode::train);
      std::vector<const signal::SnippetSeries*> ptrs{&episodes[0], &episodes[1]};
      std::vector<Rng> rngs{Rng(1), Rng(2)};
      std::vector<model::TapedEpisode> out = model::rollout_batch(f, ptrs, rngs, model::ActionMode::never_halt);
      Tensor total = Tensor::scalar(0.0);
      for (std::size_t i = 0; i < out.size(); ++i) {
        model::compute_reward(out[i].trace, episodes[i].label);
        total = total + train::episode_loss(out[i], episodes[i].label, 0.25, 0.5);
      }
      return ad::scale(total, 0.5);
    };
    // episode_loss needs taped inputs, so the finite-difference probes run on
    // a throwaway tape.
    auto loss = [&](std::span<const Tensor> values) {
      if (!values.empty() && values[0].requires_grad()) return taped_loss(values);
      ad::Tape scratch;
      std::vector<Tensor> watched;
      for (const Tensor& v : values) watched.push_back(scratch.watch(v));
      return taped_loss(watched).detached();
    };
    rows.push_back(to_row("episode_loss", ad::grad_check(loss, trainable_values(net, ids))));
  }
  return rows;
}

std::string format_gradcheck(const std::vector<GradCheckRow>& rows) {
  std::string out = "check,max_rel_err,status\n";
  char buf[64];
  for (const GradCheckRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.3e", r.max_rel_err);
    out += r.name + "," + buf + "," + (r.passed ? "pass" : "FAIL") + "\n";
  }
  return out;
}

}  // namespace spn::app
