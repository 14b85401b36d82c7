// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spn/metrics/metrics.hpp"
#include "spn/model/agent.hpp"
#include "spn/model/model.hpp"
#include "spn/nn/optim.hpp"
#include "spn/signal/record.hpp"

namespace spn::train {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double base_lr = 1e-3;
  double lr_divisor = 5.0;
  int lr_every_epochs = 20;
  double lambda_policy = 0.01;
  double baseline_momentum = 0.95;
  double clip_norm = 5.0;
  model::RewardConfig reward;
  std::uint64_t seed = 1;
  std::size_t folds = 10;
  model::ModelConfig model;

  nn::StepSchedule schedule() const { return {base_lr, lr_divisor, lr_every_epochs}; }
  void validate() const;
};

/// CE(class_probs, y) - lambda (R - baseline) sum_t log p(a_t | pi_t), with
/// R taken from episode.trace.total_reward and (R - baseline) a constant.
/// Throws UsageError when the episode is not attached to a tape.
ad::Tensor episode_loss(const model::TapedEpisode& episode, int true_label, double baseline, double lambda_policy);

/// momentum * baseline + (1 - momentum) * reward.
double update_baseline(double baseline, double reward, double momentum);

struct EpochStats {
  std::size_t epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
  double mean_reward = 0.0;
  double mean_tau_fraction = 0.0;
};

/// Mutable training state carried across epochs.
struct TrainerState {
  model::SpnModel model;
  nn::AdamState adam;
  double baseline = 0.0;
};

TrainerState initial_state(const TrainConfig& config);

/// One shuffled pass in mini-batches: lockstep rollouts with train-mode batch
/// norm, mean episode loss, backward, global-norm clipping and Adam at the
/// scheduled rate. The baseline used for a batch's advantages is its value
/// before the batch; it is then updated once per episode in batch order.
/// `mode` is stochastic for agent training, never_halt for CE-only training.
EpochStats train_epoch(TrainerState& state, std::span<const signal::SnippetSeries> data, const TrainConfig& config,
                       std::size_t epoch, model::ActionMode mode = model::ActionMode::stochastic);

struct Evaluation {
  std::vector<model::EpisodeTrace> traces;
  metrics::EvalReport report;
};

/// Frozen-parameter rollouts (eval-mode batch norm) in chunks of episodes,
/// in parallel; episode i draws from the sub-stream (seed, "eval", i).
Evaluation evaluate(const model::SpnModel& model, std::span<const signal::SnippetSeries> data, model::ActionMode mode,
                    const model::RewardConfig& reward, std::uint64_t seed, std::size_t workers);

struct HistoryRow {
  EpochStats stats;
  std::optional<metrics::EvalReport> validation;
};

struct FitResult {
  model::SpnModel model;
  std::vector<HistoryRow> history;
};

using EpochCallback = std::function<void(const HistoryRow&)>;

/// Runs config.epochs epochs (no early stopping) and evaluates the
/// validation set, when non-empty, after each epoch in thresholded mode.
FitResult fit(const TrainConfig& config, std::span<const signal::SnippetSeries> train_set,
              std::span<const signal::SnippetSeries> validation_set, const EpochCallback& on_epoch = {},
              model::ActionMode mode = model::ActionMode::stochastic);

/// epoch,lr,loss,mean_reward,mean_tau_fraction,val_accuracy,val_earliness,val_hm
std::string history_csv(std::span<const HistoryRow> history);

struct CrossValidation {
  std::vector<metrics::EvalReport> folds;
  metrics::Aggregate aggregate;
  std::vector<std::string> warnings;
};

/// Stratified k folds; fold f trains on the rest with seed (seed, "fold", f)
/// and is evaluated in thresholded mode. Folds run on up to `workers`
/// threads; results do not depend on the worker count.
CrossValidation cross_validate(const TrainConfig& config, std::span<const signal::SnippetSeries> data, std::size_t k,
                               std::size_t workers);

/// Keeps the snippets that end at or before round(fraction * L) (at least
/// one); the prediction point becomes that cut.
struct Truncated {
  signal::SnippetSeries series;
  std::size_t cut = 0;
};
Truncated truncate_series(const signal::SnippetSeries& series, double fraction);

/// CE-only model trained on series truncated at `fraction`, which always
/// classifies at the cut. Earliness is fraction up to rounding of the cut.
metrics::EvalReport fixed_fraction_baseline(const TrainConfig& config, std::span<const signal::SnippetSeries> train_set,
                                            std::span<const signal::SnippetSeries> test_set, double fraction,
                                            std::size_t workers);

}  // namespace spn::train
