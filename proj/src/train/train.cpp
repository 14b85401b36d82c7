// SPDX-License-Identifier: Apache-2.0
#include "spn/train/train.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "spn/autodiff/ops.hpp"
#include "spn/autodiff/tape.hpp"
#include "spn/data/folds.hpp"
#include "spn/util/errors.hpp"
#include "spn/util/parallel.hpp"
#include "spn/util/rng.hpp"

namespace spn::train {

using model::ActionMode;
using model::TapedEpisode;
using signal::SnippetSeries;

void TrainConfig::validate() const {
  if (batch_size < 1) throw ValidationError("train: batch_size must be at least 1");
  if (!(base_lr >= 0.0)) throw ValidationError("train: base_lr must be non-negative");
  if (!(lr_divisor > 0.0) || lr_every_epochs < 1) throw ValidationError("train: invalid learning-rate schedule");
  if (!(lambda_policy >= 0.0)) throw ValidationError("train: lambda_policy must be non-negative");
  if (!(baseline_momentum >= 0.0 && baseline_momentum <= 1.0)) {
    throw ValidationError("train: baseline_momentum must lie in [0, 1]");
  }
  if (!(clip_norm > 0.0)) throw ValidationError("train: clip_norm must be positive");
  if (!(reward.gamma > 0.0 && reward.gamma <= 1.0)) throw ValidationError("train: reward gamma must lie in (0, 1]");
  if (folds < 2) throw ValidationError("train: folds must be at least 2");
  model.validate();
}

ad::Tensor episode_loss(const TapedEpisode& episode, int true_label, double baseline, double lambda_policy) {
  if (!episode.class_probs.requires_grad()) {
    throw UsageError("episode_loss: episode is not attached to a tape (run the rollout with a tape)");
  }
  const std::size_t k = episode.class_probs.numel();
  if (true_label < 0 || static_cast<std::size_t>(true_label) >= k) throw UsageError("episode_loss: label out of range");
  std::vector<double> onehot(k, 0.0);
  onehot[static_cast<std::size_t>(true_label)] = 1.0;
  const ad::Tensor picked = ad::sum(episode.class_probs * ad::Tensor(episode.class_probs.shape(), std::move(onehot)));
  const ad::Tensor ce = -ad::log(picked);
  const double advantage = episode.trace.total_reward - baseline;
  return ce + ad::scale(episode.log_prob_sum, -lambda_policy * advantage);
}

double update_baseline(double baseline, double reward, double momentum) {
  return momentum * baseline + (1.0 - momentum) * reward;
}

TrainerState initial_state(const TrainConfig& config) {
  config.validate();
  return TrainerState{model::SpnModel(config.model, config.seed), nn::AdamState{}, 0.0};
}

EpochStats train_epoch(TrainerState& state, std::span<const SnippetSeries> data, const TrainConfig& config,
                       std::size_t epoch, ActionMode mode) {
  if (data.empty()) throw UsageError("train_epoch: empty dataset");
  EpochStats stats;
  stats.epoch = epoch;
  stats.lr = nn::lr_schedule(static_cast<int>(epoch), config.schedule());

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffler(Rng::derive(config.seed, "shuffle", epoch));
  shuffler.shuffle(std::span<std::size_t>(order));
  const std::uint64_t rollout_seed = Rng::derive(config.seed, "rollout", epoch);

  auto& entries = state.model.params().entries();
  std::vector<std::size_t> trainable;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].trainable) trainable.push_back(i);
  }

  double loss_total = 0.0, reward_total = 0.0, tau_total = 0.0;
  std::size_t batch_index = 0;
  for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size, ++batch_index) {
    const std::size_t end = std::min(order.size(), begin + config.batch_size);
    std::vector<const SnippetSeries*> batch;
    std::vector<Rng> rngs;
    for (std::size_t j = begin; j < end; ++j) {
      batch.push_back(&data[order[j]]);
      rngs.emplace_back(Rng::derive(rollout_seed, "episode", order[j]));
    }

    ad::Tape tape;
    model::Forward forward(state.model, &tape, nn::BatchNormMode::train);
    std::vector<TapedEpisode> episodes;
    ad::Tensor loss;
    try {
      episodes = model::rollout_batch(forward, batch, rngs, mode);
      const double baseline = state.baseline;
      std::vector<ad::Tensor> losses;
      for (std::size_t j = 0; j < episodes.size(); ++j) {
        model::compute_reward(episodes[j].trace, batch[j]->label, config.reward);
        losses.push_back(ad::reshape(episode_loss(episodes[j], batch[j]->label, baseline, config.lambda_policy), {1}));
      }
      loss = ad::scale(ad::sum(ad::concat(losses, 0)), 1.0 / static_cast<double>(episodes.size()));
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_index) + " seed " +
                         std::to_string(config.seed) + ": " + e.what());
    }
    for (const TapedEpisode& ep : episodes) {
      state.baseline = update_baseline(state.baseline, ep.trace.total_reward, config.baseline_momentum);
      reward_total += ep.trace.total_reward;
    }
    for (std::size_t j = 0; j < episodes.size(); ++j) {
      tau_total += static_cast<double>(episodes[j].trace.tau) / static_cast<double>(batch[j]->size());
    }
    loss_total += loss.item() * static_cast<double>(episodes.size());

    const ad::GradientMap grads = tape.backward(loss);
    std::vector<ad::Tensor> g;
    std::vector<ad::Tensor*> p;
    for (std::size_t i : trainable) {
      g.push_back(grads[forward.bound()[i]]);
      p.push_back(&entries[i].value);
    }
    nn::clip_global_norm(g, config.clip_norm);
    try {
      nn::adam_step(p, g, state.adam, stats.lr);
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_index) + " seed " +
                         std::to_string(config.seed) + ": " + e.what());
    }
    forward.commit_buffers(state.model);
  }
  const auto n = static_cast<double>(data.size());
  stats.mean_loss = loss_total / n;
  stats.mean_reward = reward_total / n;
  stats.mean_tau_fraction = tau_total / n;
  return stats;
}

Evaluation evaluate(const model::SpnModel& model, std::span<const SnippetSeries> data, ActionMode mode,
                    const model::RewardConfig& reward, std::uint64_t seed, std::size_t workers) {
  if (data.empty()) throw UsageError("evaluate: empty dataset");
  Evaluation ev;
  ev.traces.resize(data.size());
  // Eval-mode rows do not interact, so chunking only changes throughput.
  constexpr std::size_t kChunk = 32;
  const std::size_t chunks = (data.size() + kChunk - 1) / kChunk;
  parallel_for(chunks, workers, [&](std::size_t c) {
    const std::size_t begin = c * kChunk, end = std::min(data.size(), begin + kChunk);
    std::vector<const SnippetSeries*> part;
    std::vector<Rng> rngs;
    for (std::size_t i = begin; i < end; ++i) {
      part.push_back(&data[i]);
      rngs.emplace_back(Rng::derive(seed, "eval", i));
    }
    model::Forward forward(model, nullptr, nn::BatchNormMode::eval);
    auto episodes = model::rollout_batch(forward, part, rngs, mode);
    for (std::size_t i = begin; i < end; ++i) {
      ev.traces[i] = std::move(episodes[i - begin].trace);
      model::compute_reward(ev.traces[i], data[i].label, reward);
    }
  });
  std::vector<int> labels, preds;
  std::vector<std::size_t> points, lengths;
  for (std::size_t i = 0; i < data.size(); ++i) {
    labels.push_back(data[i].label);
    preds.push_back(ev.traces[i].y_hat);
    points.push_back(ev.traces[i].s);
    lengths.push_back(ev.traces[i].length);
  }
  ev.report = metrics::build_report(labels, preds, points, lengths, model.config().num_classes);
  return ev;
}

FitResult fit(const TrainConfig& config, std::span<const SnippetSeries> train_set,
              std::span<const SnippetSeries> validation_set, const EpochCallback& on_epoch, ActionMode mode) {
  TrainerState state = initial_state(config);
  std::vector<HistoryRow> history;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    HistoryRow row;
    row.stats = train_epoch(state, train_set, config, epoch, mode);
    if (!validation_set.empty()) {
      row.validation = evaluate(state.model, validation_set, ActionMode::thresholded, config.reward,
                                Rng::derive(config.seed, "validation", epoch), worker_count())
                           .report;
    }
    if (on_epoch) on_epoch(row);
    history.push_back(std::move(row));
  }
  return FitResult{std::move(state.model), std::move(history)};
}

std::string history_csv(std::span<const HistoryRow> history) {
  std::string out = "epoch,lr,loss,mean_reward,mean_tau_fraction,val_accuracy,val_earliness,val_hm\n";
  char buf[256];
  for (const HistoryRow& r : history) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g", r.stats.epoch, r.stats.lr, r.stats.mean_loss,
                  r.stats.mean_reward, r.stats.mean_tau_fraction);
    out += buf;
    if (r.validation) {
      std::snprintf(buf, sizeof(buf), ",%.17g,%.17g,%.17g\n", r.validation->accuracy, r.validation->earliness,
                    r.validation->harmonic_mean);
      out += buf;
    } else {
      out += ",,,\n";
    }
  }
  return out;
}

CrossValidation cross_validate(const TrainConfig& config, std::span<const SnippetSeries> data, std::size_t k,
                               std::size_t workers) {
  std::vector<int> labels;
  for (const SnippetSeries& s : data) labels.push_back(s.label);
  const data::FoldPlan plan = data::make_folds(labels, k, config.seed);
  CrossValidation cv;
  cv.warnings = plan.warnings;
  cv.folds.resize(k);
  parallel_for(k, workers, [&](std::size_t f) {
    std::vector<bool> held(data.size(), false);
    for (std::size_t i : plan.folds[f]) held[i] = true;
    std::vector<SnippetSeries> train_part, test_part;
    for (std::size_t i = 0; i < data.size(); ++i) (held[i] ? test_part : train_part).push_back(data[i]);
    TrainConfig fold_config = config;
    fold_config.seed = Rng::derive(config.seed, "fold", f);
    const FitResult result = fit(fold_config, train_part, {});
    cv.folds[f] = evaluate(result.model, test_part, ActionMode::thresholded, config.reward, fold_config.seed, 1).report;
  });
  cv.aggregate = metrics::aggregate(cv.folds);
  return cv;
}

Truncated truncate_series(const SnippetSeries& series, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw UsageError("truncate_series: fraction must lie in (0, 1]");
  if (series.size() == 0) throw UsageError("truncate_series: empty series");
  Truncated t;
  t.cut = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(series.record_length))));
  t.series = series;
  t.series.snippets.clear();
  for (const signal::Snippet& s : series.snippets) {
    if (s.end <= t.cut) t.series.snippets.push_back(s);
  }
  if (t.series.snippets.empty()) t.series.snippets.push_back(series.snippets.front());
  return t;
}

metrics::EvalReport fixed_fraction_baseline(const TrainConfig& config, std::span<const SnippetSeries> train_set,
                                            std::span<const SnippetSeries> test_set, double fraction,
                                            std::size_t workers) {
  std::vector<SnippetSeries> train_cut, test_cut;
  std::vector<std::size_t> cuts;
  for (const SnippetSeries& s : train_set) train_cut.push_back(truncate_series(s, fraction).series);
  for (const SnippetSeries& s : test_set) {
    Truncated t = truncate_series(s, fraction);
    cuts.push_back(t.cut);
    test_cut.push_back(std::move(t.series));
  }
  TrainConfig ce_only = config;
  ce_only.lambda_policy = 0.0;
  const FitResult result = fit(ce_only, train_cut, {}, {}, ActionMode::never_halt);
  const Evaluation ev = evaluate(result.model, test_cut, ActionMode::never_halt, config.reward, config.seed, workers);
  std::vector<int> labels, preds;
  std::vector<std::size_t> lengths;
  for (std::size_t i = 0; i < test_cut.size(); ++i) {
    labels.push_back(test_cut[i].label);
    preds.push_back(ev.traces[i].y_hat);
    lengths.push_back(test_cut[i].record_length);
  }
  return metrics::build_report(labels, preds, cuts, lengths, config.model.num_classes);
}

}  // namespace spn::train
