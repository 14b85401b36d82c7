// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "spn/autodiff/ops.hpp"
#include "spn/autodiff/tape.hpp"
#include "spn/nn/optim.hpp"
#include "spn/train/train.hpp"
#include "spn/util/errors.hpp"
#include "spn/util/rng.hpp"

using namespace spn;
using namespace spn::train;
using ad::Tensor;
using model::ActionMode;
using signal::SnippetSeries;

namespace {

TrainConfig tiny_train_config(std::size_t classes = 2) {
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 4;
  c.model.input_channels = 1;
  c.model.block_layers = {1, 1};
  c.model.block_channels = {3, 4};
  c.model.hidden = 4;
  c.model.snippet_width = 9;
  c.model.num_classes = classes;
  c.model.policy_bias_init = -1.0;
  c.folds = 3;
  return c;
}

// The label shifts the mean of every snippet, so a small model can learn it.
std::vector<SnippetSeries> toy_data(std::size_t n, std::size_t classes, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SnippetSeries> out;
  for (std::size_t i = 0; i < n; ++i) {
    SnippetSeries s;
    s.channels = 1;
    s.width = 9;
    s.label = static_cast<int>(i % classes);
    s.record_id = "toy" + std::to_string(i);
    std::size_t pos = 0;
    const std::size_t t = 2 + rng.below(5);
    for (std::size_t j = 0; j < t; ++j) {
      signal::Snippet snip;
      for (std::size_t w = 0; w < 9; ++w) snip.values.push_back(0.3 * rng.normal() + (s.label == 0 ? -1.0 : 1.0) * (w % 3 == 1));
      snip.start = pos;
      pos += 10;
      snip.end = pos;
      s.snippets.push_back(std::move(snip));
    }
    s.record_length = pos + 5;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::vector<double>> trainable_values(const model::SpnModel& m) {
  std::vector<std::vector<double>> out;
  for (const auto& p : m.params().entries()) {
    if (p.trainable) out.emplace_back(p.value.values().begin(), p.value.values().end());
  }
  return out;
}

std::vector<std::vector<double>> all_values(const model::SpnModel& m) {
  std::vector<std::vector<double>> out;
  for (const auto& p : m.params().entries()) out.emplace_back(p.value.values().begin(), p.value.values().end());
  return out;
}

struct HandEpisode {
  ad::Tape tape;
  model::TapedEpisode episode;
  Tensor probs_leaf;
  Tensor logp_leaf;
};

void make_episode(HandEpisode& h, std::vector<double> probs, double logp, double reward) {
  const std::size_t k = probs.size();
  h.probs_leaf = h.tape.watch(Tensor({1, k}, std::move(probs)));
  h.logp_leaf = h.tape.watch(Tensor::scalar(logp));
  h.episode.class_probs = h.probs_leaf;
  h.episode.log_prob_sum = h.logp_leaf;
  h.episode.trace.total_reward = reward;
}

}  // namespace

TEST_CASE("episode loss with lambda 0 is cross-entropy") {
  HandEpisode h;
  make_episode(h, {0.2, 0.5, 0.3}, -2.7, 4.0);
  const Tensor loss = episode_loss(h.episode, 2, 1.0, 0.0);
  CHECK(loss.item() == doctest::Approx(-std::log(0.3)).epsilon(1e-10));
  const ad::GradientMap g = h.tape.backward(loss);
  CHECK(g[h.logp_leaf].item() == 0.0);
}

TEST_CASE("policy term vanishes when the reward equals the baseline") {
  HandEpisode h;
  make_episode(h, {0.6, 0.4}, -1.3, 3.0);
  const Tensor loss = episode_loss(h.episode, 0, 3.0, 0.5);
  CHECK(loss.item() == doctest::Approx(-std::log(0.6)).epsilon(1e-10));
  const ad::GradientMap g = h.tape.backward(loss);
  CHECK(g[h.logp_leaf].item() == 0.0);
}

TEST_CASE("episode loss gradient matches the closed form") {
  const double p1 = 0.35, reward = -2.0, baseline = 0.75, lambda = 0.2;
  HandEpisode h;
  make_episode(h, {0.4, p1, 0.25}, std::log(0.3) + std::log(0.9), reward);
  const Tensor loss = episode_loss(h.episode, 1, baseline, lambda);
  const ad::GradientMap g = h.tape.backward(loss);
  const Tensor& dp = g[h.probs_leaf];
  CHECK(std::abs(dp[0]) <= 1e-10);
  CHECK(std::abs(dp[1] - (-1.0 / p1)) <= 1e-10);
  CHECK(std::abs(dp[2]) <= 1e-10);
  CHECK(std::abs(g[h.logp_leaf].item() - (-lambda * (reward - baseline))) <= 1e-10);

  model::TapedEpisode untaped;
  untaped.class_probs = Tensor({1, 2}, {0.5, 0.5});
  untaped.log_prob_sum = Tensor::scalar(0.0);
  CHECK_THROWS_AS(episode_loss(untaped, 0, 0.0, 0.1), UsageError);
}

TEST_CASE("baseline moving average") {
  CHECK(update_baseline(0.0, 5.0, 0.95) == doctest::Approx(0.25));
  CHECK(update_baseline(0.25, -3.0, 0.95) == doctest::Approx(0.95 * 0.25 - 0.15));
  CHECK(update_baseline(2.0, 9.0, 1.0) == 2.0);
  CHECK(update_baseline(2.0, 9.0, 0.0) == 9.0);
}

TEST_CASE("learning-rate schedule breakpoints") {
  const nn::StepSchedule s = TrainConfig{}.schedule();
  const double expected[] = {1e-3, 2e-4, 4e-5, 8e-6, 1.6e-6};
  for (int k = 0; k < 5; ++k) {
    CHECK(nn::lr_schedule(20 * k, s) == doctest::Approx(expected[k]).epsilon(1e-12));
    CHECK(nn::lr_schedule(20 * k + 19, s) == doctest::Approx(expected[k]).epsilon(1e-12));
  }
}

TEST_CASE("zero learning rate leaves trainables unchanged") {
  TrainConfig c = tiny_train_config();
  c.base_lr = 0.0;
  const auto data = toy_data(10, 2, 3);
  TrainerState state = initial_state(c);
  const auto before = trainable_values(state.model);
  const EpochStats stats = train_epoch(state, data, c, 0);
  CHECK(stats.lr == 0.0);
  CHECK(trainable_values(state.model) == before);
  CHECK(state.adam.step == 3);
}

TEST_CASE("training is deterministic") {
  const TrainConfig c = tiny_train_config();
  const auto data = toy_data(12, 2, 4);
  TrainerState a = initial_state(c), b = initial_state(c);
  for (std::size_t e = 0; e < 2; ++e) {
    const EpochStats sa = train_epoch(a, data, c, e);
    const EpochStats sb = train_epoch(b, data, c, e);
    CHECK(sa.mean_loss == sb.mean_loss);
    CHECK(sa.mean_reward == sb.mean_reward);
  }
  CHECK(all_values(a.model) == all_values(b.model));
  CHECK(a.baseline == b.baseline);

  TrainConfig other = c;
  other.seed = 2;
  TrainerState d = initial_state(other);
  train_epoch(d, data, other, 0);
  CHECK(all_values(d.model) != all_values(a.model));
}

TEST_CASE("a single sample is memorized") {
  TrainConfig c = tiny_train_config(3);
  c.base_lr = 1e-2;
  c.batch_size = 1;
  c.lambda_policy = 0.0;
  c.lr_every_epochs = 1000;
  auto data = toy_data(1, 3, 5);
  data[0].label = 2;
  TrainerState state = initial_state(c);
  double first = 0, last = 0;
  for (std::size_t e = 0; e < 200; ++e) {
    const EpochStats s = train_epoch(state, data, c, e, ActionMode::never_halt);
    if (e == 0) first = s.mean_loss;
    last = s.mean_loss;
  }
  CHECK(last < 0.05);
  CHECK(last < first);
  Rng rng(1);
  CHECK(model::rollout(data[0], state.model, rng, ActionMode::never_halt).y_hat == 2);
}

TEST_CASE("fit and history") {
  TrainConfig c = tiny_train_config();
  const auto train_set = toy_data(8, 2, 6);
  const auto val = toy_data(6, 2, 7);

  c.epochs = 0;
  const FitResult none = fit(c, train_set, val);
  CHECK(none.history.empty());
  CHECK(all_values(none.model) == all_values(initial_state(c).model));

  c.epochs = 3;
  std::size_t calls = 0;
  const FitResult r = fit(c, train_set, val, [&](const HistoryRow&) { ++calls; });
  CHECK(r.history.size() == 3);
  CHECK(calls == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(r.history[e].stats.epoch == e);
    REQUIRE(r.history[e].validation.has_value());
    CHECK(r.history[e].validation->confusion.size() == 2);
  }
  const std::string csv = history_csv(r.history);
  CHECK(csv.rfind("epoch,lr,loss,mean_reward,mean_tau_fraction,val_accuracy,val_earliness,val_hm\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  const FitResult no_val = fit(c, train_set, {});
  for (const auto& row : no_val.history) CHECK_FALSE(row.validation.has_value());
  CHECK(all_values(no_val.model) == all_values(r.model));
}

TEST_CASE("evaluation does not depend on the worker count") {
  const TrainConfig c = tiny_train_config();
  const auto data = toy_data(70, 2, 8);
  const model::SpnModel m = initial_state(c).model;
  const Evaluation one = evaluate(m, data, ActionMode::stochastic, c.reward, 11, 1);
  const Evaluation four = evaluate(m, data, ActionMode::stochastic, c.reward, 11, 4);
  CHECK(one.report == four.report);
  REQUIRE(one.traces.size() == four.traces.size());
  for (std::size_t i = 0; i < one.traces.size(); ++i) {
    CHECK(one.traces[i].pis == four.traces[i].pis);
    CHECK(one.traces[i].tau == four.traces[i].tau);
  }
}

TEST_CASE("cross-validation") {
  TrainConfig c = tiny_train_config();
  c.epochs = 1;
  const auto data = toy_data(12, 2, 9);
  const CrossValidation cv = cross_validate(c, data, 3, 2);
  REQUIRE(cv.folds.size() == 3);
  std::size_t total = 0;
  double acc = 0;
  for (const auto& f : cv.folds) {
    for (const auto& row : f.confusion) total += std::accumulate(row.begin(), row.end(), std::size_t{0});
    acc += f.accuracy;
  }
  CHECK(total == data.size());
  CHECK(cv.aggregate.mean[0] == doctest::Approx(acc / 3).epsilon(1e-12));
  CHECK(cv.warnings.empty());

  const CrossValidation again = cross_validate(c, data, 3, 1);
  for (std::size_t f = 0; f < 3; ++f) CHECK(again.folds[f] == cv.folds[f]);
}

TEST_CASE("truncation and the fixed-fraction baseline") {
  const auto data = toy_data(6, 2, 10);
  const SnippetSeries& s = data[0];
  const Truncated whole = truncate_series(s, 1.0);
  CHECK(whole.cut == s.record_length);
  CHECK(whole.series.size() == s.size());
  const Truncated tiny = truncate_series(s, 1e-6);
  CHECK(tiny.cut == 1);
  CHECK(tiny.series.size() == 1);
  const Truncated half = truncate_series(s, 0.5);
  for (const auto& snip : half.series.snippets) CHECK(snip.end <= std::max<std::size_t>(half.cut, s.snippets[0].end));

  TrainConfig c = tiny_train_config();
  c.epochs = 1;
  const metrics::EvalReport full = fixed_fraction_baseline(c, data, data, 1.0, 1);
  CHECK(full.earliness == 1.0);
  CHECK(full.harmonic_mean == 0.0);
}

TEST_CASE("training errors") {
  const TrainConfig c = tiny_train_config();
  TrainerState state = initial_state(c);
  CHECK_THROWS_AS(train_epoch(state, std::span<const SnippetSeries>{}, c, 0), UsageError);
  TrainConfig bad = c;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = c;
  bad.model.snippet_width = 10;
  CHECK_THROWS_AS(bad.validate(), ShapeError);
}
