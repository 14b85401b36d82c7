// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "spn/model/model.hpp"
#include "spn/signal/record.hpp"
#include "spn/util/rng.hpp"

namespace spn::model {

enum class ActionMode {
  stochastic,
  thresholded,
  never_halt,  // always continue; used for CE-only training of baselines
};
enum class RewardVariant { paper, latency };

struct RewardConfig {
  RewardVariant variant = RewardVariant::paper;
  double gamma = 0.99;  // latency variant only
};

const char* to_string(ActionMode mode);
const char* to_string(RewardVariant variant);
ActionMode parse_action_mode(const std::string& text);
RewardVariant parse_reward_variant(const std::string& text);

/// Stochastic: Bernoulli(pi) from `rng`. Thresholded: 1 iff pi >= 0.5.
/// Only the stochastic mode draws from `rng`.
int sample_action(double pi, Rng& rng, ActionMode mode);

struct EpisodeTrace {
  std::vector<double> pis;
  std::vector<int> actions;
  std::vector<double> log_probs;
  std::size_t tau = 0;  // 1-based halting step
  bool halted_by_policy = false;
  int y_hat = 0;
  std::vector<double> class_probs;
  double total_reward = 0.0;
  std::size_t s = 0;       // end sample of snippet tau
  std::size_t length = 0;  // record length L
};

/// Structural checks on a finished trace; throws ValidationError naming the
/// first violation. |R| == tau is checked for the paper reward only.
void validate_trace(const EpisodeTrace& trace, std::size_t num_classes, RewardVariant variant = RewardVariant::paper);

/// A trace plus the tensors training differentiates. With a tape they are
/// attached to it; otherwise they are plain values.
struct TapedEpisode {
  EpisodeTrace trace;
  Tensor class_probs;   // [1, K]
  Tensor log_prob_sum;  // scalar, sum over t <= tau of log p(a_t | pi_t)
};

/// Runs all episodes in lockstep; rngs[i] drives episode i. With train-mode
/// batch norm the CNN first encodes every snippet of every episode as one
/// batch (the CNN is stateless, so S_t does not depend on halting), which
/// gives batch statistics over the whole mini-batch. In eval mode snippets
/// are encoded step by step and only while an episode is running.
std::vector<TapedEpisode> rollout_batch(Forward& forward, std::span<const signal::SnippetSeries* const> series,
                                        std::span<Rng> rngs, ActionMode mode);

/// Single episode with frozen parameters and eval-mode batch norm.
EpisodeTrace rollout(const signal::SnippetSeries& series, const SpnModel& model, Rng& rng, ActionMode mode);

/// Sets and returns trace.total_reward: paper variant +tau / -tau,
/// latency variant gamma^(tau-1) / -1.
double compute_reward(EpisodeTrace& trace, int true_label, const RewardConfig& config = {});

}  // namespace spn::model
