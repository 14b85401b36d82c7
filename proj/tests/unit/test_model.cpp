// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "spn/autodiff/grad_check.hpp"
#include "spn/autodiff/ops.hpp"
#include "spn/autodiff/tape.hpp"
#include "spn/model/agent.hpp"
#include "spn/model/model.hpp"
#include "spn/util/errors.hpp"
#include "spn/util/rng.hpp"

using namespace spn;
using namespace spn::model;
using ad::Tensor;
using signal::SnippetSeries;

namespace {

ModelConfig tiny_config(std::size_t channels = 2, std::size_t classes = 3) {
  ModelConfig c;
  c.input_channels = channels;
  c.block_layers = {1, 2};
  c.block_channels = {3, 4};
  c.hidden = 3;
  c.snippet_width = 9;
  c.num_classes = classes;
  return c;
}

SnippetSeries random_series(Rng& rng, std::size_t t, std::size_t channels, std::size_t width, int label = 0) {
  SnippetSeries s;
  s.channels = channels;
  s.width = width;
  s.label = label;
  s.record_id = "r";
  std::size_t pos = 1 + rng.below(20);
  for (std::size_t i = 0; i < t; ++i) {
    signal::Snippet snip;
    snip.values.resize(channels * width);
    for (double& v : snip.values) v = rng.normal();
    snip.start = pos;
    pos += 20 + rng.below(60);
    snip.end = pos;
    s.snippets.push_back(std::move(snip));
  }
  s.record_length = pos + rng.below(30);
  return s;
}

void set_all(SpnModel& m, double value) {
  for (auto& p : m.params().entries()) {
    if (p.trainable) p.value = Tensor::full(p.value.shape(), value);
  }
}

void set_param(SpnModel& m, const char* name, double value) {
  auto& p = m.params().at(m.params().index_of(name));
  p.value = Tensor::full(p.value.shape(), value);
}

bool same_trace(const EpisodeTrace& a, const EpisodeTrace& b) {
  return a.pis == b.pis && a.actions == b.actions && a.log_probs == b.log_probs && a.tau == b.tau &&
         a.halted_by_policy == b.halted_by_policy && a.y_hat == b.y_hat && a.class_probs == b.class_probs &&
         a.s == b.s && a.length == b.length;
}

}  // namespace

TEST_CASE("configuration checks") {
  ModelConfig c;
  CHECK(c.conv_layers() == 13);
  CHECK(c.feature_size() == 32);
  CHECK_NOTHROW(c.validate());
  c.snippet_width = 240;
  CHECK_THROWS_AS(SpnModel(c, 1), ShapeError);
  const ModelConfig p = ModelConfig::paper_scale();
  CHECK(p.conv_layers() == 13);
  CHECK(p.hidden == 256);
  CHECK(p.feature_size() == 512);
  CHECK(p.input_channels == 12);
  CHECK(p.num_classes == 9);
}

TEST_CASE("all-zero parameters give zero features and hidden state") {
  SpnModel m(ModelConfig{}, 3);
  set_all(m, 0.0);
  Forward f(m, nullptr, nn::BatchNormMode::eval);
  const BackboneState st = f.backbone_step(Tensor::zeros({1, 2, 243}), initial_state(m.config(), 1));
  for (double v : st.s.values()) CHECK(v == 0.0);
  for (double v : st.h.values()) CHECK(v == 0.0);
  for (double v : st.c.values()) CHECK(v == 0.0);
}

TEST_CASE("CNN is stateless while the recurrence is not") {
  Rng rng(2);
  SpnModel m(tiny_config(), 5);
  Forward f(m, nullptr, nn::BatchNormMode::eval);
  const SnippetSeries s = random_series(rng, 1, 2, 9);
  const Tensor x({1, 2, 9}, s.snippets[0].values);
  const BackboneState s1 = f.backbone_step(x, initial_state(m.config(), 1));
  const BackboneState s2 = f.backbone_step(x, s1);
  CHECK(std::vector<double>(s1.s.values().begin(), s1.s.values().end()) ==
        std::vector<double>(s2.s.values().begin(), s2.s.values().end()));
  CHECK(std::vector<double>(s1.h.values().begin(), s1.h.values().end()) !=
        std::vector<double>(s2.h.values().begin(), s2.h.values().end()));

  // The same snippet inside a different batch yields the same encoding.
  const SnippetSeries other = random_series(rng, 1, 2, 9);
  std::vector<double> both = other.snippets[0].values;
  both.insert(both.end(), s.snippets[0].values.begin(), s.snippets[0].values.end());
  const Tensor pair = f.cnn(Tensor({2, 2, 9}, both));
  for (std::size_t j = 0; j < s1.s.numel(); ++j) CHECK(pair[s1.s.numel() + j] == s1.s[j]);
}

TEST_CASE("gradient of a function of H_3 w.r.t. conv kernels") {
  Rng rng(8);
  SpnModel m(tiny_config(), 4);
  std::vector<Tensor> xs;
  for (int t = 0; t < 3; ++t) xs.push_back(Tensor({2, 2, 9}, random_series(rng, 1, 2, 18).snippets[0].values));
  const auto& lay = m.layout();
  const std::vector<std::size_t> kernel_ids{lay.blocks[0][0].weight, lay.blocks[1][0].weight, lay.blocks[1][1].weight};
  std::vector<Tensor> inputs;
  for (std::size_t id : kernel_ids) inputs.push_back(m.params().at(id).value);

  auto f = [&](std::span<const Tensor> kernels) {
    std::vector<Tensor> bound = m.params().bind(nullptr);
    for (std::size_t i = 0; i < kernel_ids.size(); ++i) bound[kernel_ids[i]] = kernels[i];
    Forward fwd(m, std::move(bound), nn::BatchNormMode::train);
    BackboneState st = initial_state(m.config(), 2);
    for (const Tensor& x : xs) st = fwd.backbone_step(x, st);
    Rng w(99);
    std::vector<double> weights(st.h.numel());
    for (double& v : weights) v = w.uniform(-1, 1);
    return ad::sum(st.h * Tensor(st.h.shape(), weights));
  };
  const ad::CheckReport report = ad::grad_check(f, inputs);
  INFO(report.describe());
  CHECK(report.passed);
}

TEST_CASE("policy head") {
  SpnModel m(tiny_config(), 1);
  set_param(m, "policy.weight", 0.0);
  set_param(m, "policy.bias", 0.0);
  Rng rng(3);
  Tensor h({4, 3}, {1, -2, 3, 0.5, 0.1, -0.7, 2, 2, 2, -1, -1, 5});
  {
    Forward f(m, nullptr, nn::BatchNormMode::eval);
    const Tensor pi = f.policy_prob(h);
    for (double p : pi.values()) CHECK(p == 0.5);
  }
  set_param(m, "policy.bias", 30.0);
  {
    Forward f(m, nullptr, nn::BatchNormMode::eval);
    const Tensor pi = f.policy_prob(h);
    for (double p : pi.values()) CHECK(p > 1.0 - 1e-9);
  }

  // Bernoulli log-likelihood of fixed actions, differentiated w.r.t. the head.
  SpnModel g(tiny_config(), 6);
  const auto& lay = g.layout();
  const Tensor actions({4, 1}, {1, 0, 0, 1});
  auto loglik = [&](std::span<const Tensor> head) {
    const Tensor pi = ad::sigmoid(nn::linear(h, head[0], head[1]));
    const Tensor ones = Tensor::full({4, 1}, 1.0);
    return ad::sum(actions * ad::log(pi) + (ones - actions) * ad::log(ones - pi));
  };
  ad::CheckOptions opts;
  opts.tolerance = 1e-6;
  const ad::CheckReport report =
      ad::grad_check(loglik, {g.params().at(lay.policy_weight).value, g.params().at(lay.policy_bias).value}, opts);
  INFO(report.describe());
  CHECK(report.passed);
}

TEST_CASE("action sampling") {
  Rng rng(21);
  std::size_t ones = 0;
  for (int i = 0; i < 1000000; ++i) ones += sample_action(0.999999, rng, ActionMode::stochastic);
  CHECK(static_cast<double>(ones) / 1e6 >= 0.9999);
  CHECK(sample_action(0.4, rng, ActionMode::thresholded) == 0);
  CHECK(sample_action(0.5, rng, ActionMode::thresholded) == 1);
  CHECK(sample_action(0.9, rng, ActionMode::never_halt) == 0);
  std::size_t hits = 0;
  for (int i = 0; i < 100000; ++i) hits += sample_action(0.3, rng, ActionMode::stochastic);
  CHECK(std::abs(static_cast<double>(hits) / 1e5 - 0.3) <= 0.005);

  // Thresholded sampling does not advance the generator.
  Rng a(5), b(5);
  sample_action(0.7, a, ActionMode::thresholded);
  CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("discriminator head") {
  SpnModel m(tiny_config(2, 4), 1);
  set_param(m, "disc.weight", 0.0);
  set_param(m, "disc.bias", 0.0);
  Forward f(m, nullptr, nn::BatchNormMode::eval);
  const Tensor p = f.class_probs(Tensor({1, 3}, {0.3, -2, 1}));
  for (double v : p.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-11));
  CHECK(argmax(p.values()) == 0);

  const std::vector<double> logits{1, 3, 2};
  CHECK(argmax(logits) == 1);
  CHECK(argmax(ad::softmax_rows(Tensor({1, 3}, logits)).values()) == 1);

  SpnModel r(tiny_config(2, 5), 9);
  Forward fr(r, nullptr, nn::BatchNormMode::eval);
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> hv(3);
    for (double& v : hv) v = rng.uniform(-10, 10);
    const Tensor probs = fr.class_probs(Tensor({1, 3}, hv));
    double total = 0;
    for (double v : probs.values()) total += v;
    CHECK(std::abs(total - 1.0) <= 1e-9);
  }
}

TEST_CASE("rollout halting rules") {
  Rng rng(12);
  const SnippetSeries s = random_series(rng, 6, 2, 9, 1);
  SpnModel m(tiny_config(), 2);
  set_param(m, "policy.weight", 0.0);
  set_param(m, "policy.bias", 30.0);
  EpisodeTrace now = rollout(s, m, rng, ActionMode::stochastic);
  CHECK(now.tau == 1);
  CHECK(now.log_probs.size() == 1);
  CHECK(now.halted_by_policy);
  CHECK(now.s == s.snippets[0].end);

  set_param(m, "policy.bias", -30.0);
  EpisodeTrace never = rollout(s, m, rng, ActionMode::stochastic);
  CHECK(never.tau == 6);
  CHECK_FALSE(never.halted_by_policy);
  CHECK(never.s == s.snippets[5].end);
  CHECK(never.length == s.record_length);

  SnippetSeries empty = s;
  empty.snippets.clear();
  CHECK_THROWS_AS(rollout(empty, m, rng, ActionMode::stochastic), UsageError);
  SnippetSeries wrong = s;
  wrong.width = 27;
  CHECK_THROWS_AS(rollout(wrong, m, rng, ActionMode::stochastic), ShapeError);
}

TEST_CASE("rollouts are deterministic and batch-independent in eval mode") {
  Rng data_rng(31);
  std::vector<SnippetSeries> series;
  for (int i = 0; i < 7; ++i) series.push_back(random_series(data_rng, 1 + data_rng.below(9), 2, 9, i % 3));
  SpnModel m(tiny_config(), 17);
  set_param(m, "policy.bias", -0.5);
  for (ActionMode mode : {ActionMode::stochastic, ActionMode::thresholded}) {
    std::vector<EpisodeTrace> single;
    for (std::size_t i = 0; i < series.size(); ++i) {
      Rng a(100 + i), b(100 + i);
      const EpisodeTrace t1 = rollout(series[i], m, a, mode);
      const EpisodeTrace t2 = rollout(series[i], m, b, mode);
      CHECK(same_trace(t1, t2));
      single.push_back(t1);
    }
    Forward f(m, nullptr, nn::BatchNormMode::eval);
    std::vector<const SnippetSeries*> ptrs;
    std::vector<Rng> rngs;
    for (std::size_t i = 0; i < series.size(); ++i) {
      ptrs.push_back(&series[i]);
      rngs.emplace_back(100 + i);
    }
    const auto batch = rollout_batch(f, ptrs, rngs, mode);
    for (std::size_t i = 0; i < series.size(); ++i) CHECK(same_trace(batch[i].trace, single[i]));
  }
}

TEST_CASE("rewards") {
  EpisodeTrace t;
  t.tau = 5;
  t.y_hat = 2;
  CHECK(compute_reward(t, 2) == 5.0);
  CHECK(t.total_reward == 5.0);
  CHECK(compute_reward(t, 1) == -5.0);
  t.tau = 1;
  CHECK(compute_reward(t, 2) == 1.0);
  RewardConfig latency{RewardVariant::latency, 0.99};
  t.tau = 3;
  CHECK(compute_reward(t, 2, latency) == 0.99 * 0.99);
  CHECK(compute_reward(t, 0, latency) == -1.0);
  CHECK(parse_reward_variant("latency") == RewardVariant::latency);
  CHECK_THROWS_AS(parse_reward_variant("other"), ValidationError);
  CHECK(parse_action_mode("thresholded") == ActionMode::thresholded);
}

TEST_CASE("random rollouts satisfy the trace invariants") {
  Rng rng(1234);
  for (int trial = 0; trial < 1000; ++trial) {
    ModelConfig c;
    c.input_channels = 1 + rng.below(3);
    c.block_layers = {1 + rng.below(2), 1 + rng.below(2), 1};
    c.block_channels = {2 + rng.below(3), 2 + rng.below(3), 2 + rng.below(3)};
    c.hidden = 2 + rng.below(5);
    c.snippet_width = 27;
    c.num_classes = 2 + rng.below(4);
    c.policy_bias_init = rng.uniform(-3, 2);
    SpnModel m(c, rng.next_u64());
    const SnippetSeries s = random_series(rng, 1 + rng.below(12), c.input_channels, 27,
                                          static_cast<int>(rng.below(c.num_classes)));
    const ActionMode mode = trial % 2 ? ActionMode::stochastic : ActionMode::thresholded;
    EpisodeTrace t = rollout(s, m, rng, mode);
    compute_reward(t, s.label);
    CHECK_NOTHROW(validate_trace(t, c.num_classes));
    CHECK(t.tau <= s.size());
    if (!t.halted_by_policy) CHECK(t.tau == s.size());
  }
}

TEST_CASE("trace validation catches violations") {
  EpisodeTrace t;
  t.pis = {0.2, 0.7};
  t.actions = {0, 1};
  t.log_probs = {std::log(0.8), std::log(0.7)};
  t.tau = 2;
  t.halted_by_policy = true;
  t.class_probs = {0.2, 0.8};
  t.y_hat = 1;
  t.total_reward = 2;
  t.s = 10;
  t.length = 10;
  CHECK_NOTHROW(validate_trace(t, 2));
  EpisodeTrace bad = t;
  bad.actions = {1, 1};
  CHECK_THROWS_AS(validate_trace(bad, 2), ValidationError);
  bad = t;
  bad.total_reward = 3;
  CHECK_THROWS_AS(validate_trace(bad, 2), ValidationError);
  CHECK_NOTHROW(validate_trace(bad, 2, RewardVariant::latency));
  bad = t;
  bad.s = 11;
  CHECK_THROWS_AS(validate_trace(bad, 2), ValidationError);
  bad = t;
  bad.y_hat = 0;
  CHECK_THROWS_AS(validate_trace(bad, 2), ValidationError);
}

TEST_CASE("zero discriminator head predicts class 0 on balanced labels") {
  const std::size_t k = 3, n = 600;
  ModelConfig c = tiny_config(2, k);
  SpnModel m(c, 4);
  set_param(m, "disc.weight", 0.0);
  set_param(m, "disc.bias", 0.0);
  Rng rng(77);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const SnippetSeries s = random_series(rng, 2, 2, 9, static_cast<int>(rng.below(k)));
    const EpisodeTrace t = rollout(s, m, rng, ActionMode::thresholded);
    correct += t.y_hat == s.label;
  }
  const double p = 1.0 / k;
  CHECK(std::abs(static_cast<double>(correct) / n - p) <= 3 * std::sqrt(p * (1 - p) / n));
}
