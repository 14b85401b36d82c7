// SPDX-License-Identifier: Apache-2.0
#include "spn/model/agent.hpp"

#include <cmath>

#include "spn/autodiff/ops.hpp"
#include "spn/util/errors.hpp"

namespace spn::model {

const char* to_string(ActionMode mode) {
  switch (mode) {
    case ActionMode::stochastic: return "stochastic";
    case ActionMode::thresholded: return "thresholded";
    case ActionMode::never_halt: return "never_halt";
  }
  return "?";
}
const char* to_string(RewardVariant variant) { return variant == RewardVariant::paper ? "paper" : "latency"; }

ActionMode parse_action_mode(const std::string& text) {
  if (text == "stochastic") return ActionMode::stochastic;
  if (text == "thresholded") return ActionMode::thresholded;
  throw ValidationError("unknown mode '" + text + "' (expected stochastic or thresholded)");
}

RewardVariant parse_reward_variant(const std::string& text) {
  if (text == "paper") return RewardVariant::paper;
  if (text == "latency") return RewardVariant::latency;
  throw ValidationError("unknown reward '" + text + "' (expected paper or latency)");
}

int sample_action(double pi, Rng& rng, ActionMode mode) {
  if (mode == ActionMode::never_halt) return 0;
  if (mode == ActionMode::thresholded) return pi >= 0.5 ? 1 : 0;
  return rng.bernoulli(pi) ? 1 : 0;
}

void validate_trace(const EpisodeTrace& t, std::size_t num_classes, RewardVariant variant) {
  auto fail = [](const std::string& what) { throw ValidationError("trace: " + what); };
  if (t.tau == 0) fail("tau must be at least 1");
  if (t.pis.size() != t.tau || t.actions.size() != t.tau || t.log_probs.size() != t.tau) {
    fail("pis, actions and log_probs must all have length tau");
  }
  for (std::size_t i = 0; i < t.tau; ++i) {
    if (!(t.pis[i] > 0.0 && t.pis[i] < 1.0)) fail("pi outside (0, 1) at step " + std::to_string(i + 1));
    if (i + 1 < t.tau && t.actions[i] != 0) fail("halt action before tau at step " + std::to_string(i + 1));
  }
  if (t.halted_by_policy != (t.actions.back() == 1)) fail("last action disagrees with halted_by_policy");
  if (t.class_probs.size() != num_classes) fail("class_probs has the wrong length");
  double total = 0.0;
  for (double p : t.class_probs) total += p;
  if (std::abs(total - 1.0) > 1e-6) fail("class_probs does not sum to 1");
  if (static_cast<std::size_t>(t.y_hat) != argmax(t.class_probs)) fail("y_hat is not the argmax");
  if (t.s == 0 || t.s > t.length) fail("prediction point outside (0, L]");
  if (variant == RewardVariant::paper && std::abs(t.total_reward) != static_cast<double>(t.tau)) {
    fail("|total_reward| != tau");
  }
}

std::vector<TapedEpisode> rollout_batch(Forward& forward, std::span<const signal::SnippetSeries* const> series,
                                        std::span<Rng> rngs, ActionMode mode) {
  const ModelConfig& cfg = forward.model().config();
  const std::size_t batch = series.size();
  if (batch == 0) throw UsageError("rollout: empty batch");
  if (rngs.size() != batch) throw UsageError("rollout: need one generator per episode");
  for (const signal::SnippetSeries* s : series) {
    if (s->size() == 0) throw UsageError("rollout: series '" + s->record_id + "' has no snippets");
    if (s->channels != cfg.input_channels || s->width != cfg.snippet_width) {
      throw ShapeError("rollout: series '" + s->record_id + "' is " + std::to_string(s->channels) + "x" +
                       std::to_string(s->width) + ", model expects " + std::to_string(cfg.input_channels) + "x" +
                       std::to_string(cfg.snippet_width));
    }
  }

  std::vector<TapedEpisode> out(batch);
  std::vector<Tensor> h_tau(batch);
  std::vector<std::size_t> active(batch);
  for (std::size_t i = 0; i < batch; ++i) active[i] = i;
  BackboneState state = initial_state(cfg, batch);
  const std::size_t snippet_size = cfg.input_channels * cfg.snippet_width;

  // Train mode: encode all snippets at once; row offset[i] + t is S_t of episode i.
  Tensor all_features;
  std::vector<std::size_t> offset(batch, 0);
  if (forward.mode() == nn::BatchNormMode::train) {
    std::size_t rows = 0;
    for (std::size_t i = 0; i < batch; ++i) {
      offset[i] = rows;
      rows += series[i]->size();
    }
    std::vector<double> x(rows * snippet_size);
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t t = 0; t < series[i]->size(); ++t) {
        const auto& v = series[i]->snippets[t].values;
        std::copy(v.begin(), v.end(), x.begin() + static_cast<std::ptrdiff_t>((offset[i] + t) * snippet_size));
      }
    }
    all_features = forward.cnn(Tensor({rows, cfg.input_channels, cfg.snippet_width}, std::move(x)));
  }

  for (std::size_t t = 0; !active.empty(); ++t) {
    const std::size_t a = active.size();
    if (forward.mode() == nn::BatchNormMode::train) {
      std::vector<Tensor> rows;
      for (std::size_t i : active) rows.push_back(ad::slice(all_features, 0, offset[i] + t, offset[i] + t + 1));
      state = forward.recurrent_step(ad::concat(rows, 0), state);
    } else {
      std::vector<double> x(a * snippet_size);
      for (std::size_t r = 0; r < a; ++r) {
        const auto& v = series[active[r]]->snippets[t].values;
        std::copy(v.begin(), v.end(), x.begin() + static_cast<std::ptrdiff_t>(r * snippet_size));
      }
      state = forward.backbone_step(Tensor({a, cfg.input_channels, cfg.snippet_width}, std::move(x)), state);
    }
    const Tensor pi = forward.policy_prob(state.h);

    std::vector<double> act(a);
    for (std::size_t r = 0; r < a; ++r) act[r] = sample_action(pi[r], rngs[active[r]], mode);
    // log p(a | pi) = a log pi + (1 - a) log(1 - pi)
    const Tensor took({a, 1}, act);
    const Tensor ones = Tensor::full({a, 1}, 1.0);
    const Tensor logp = took * ad::log(pi) + (ones - took) * ad::log(ones - pi);

    std::vector<std::size_t> still;
    std::vector<std::size_t> keep_rows;
    for (std::size_t r = 0; r < a; ++r) {
      const std::size_t i = active[r];
      EpisodeTrace& tr = out[i].trace;
      tr.pis.push_back(pi[r]);
      tr.actions.push_back(static_cast<int>(act[r]));
      tr.log_probs.push_back(logp[r]);
      const Tensor step_logp = ad::sum(ad::slice(logp, 0, r, r + 1));
      out[i].log_prob_sum = t == 0 ? step_logp : out[i].log_prob_sum + step_logp;
      const bool halt = act[r] == 1.0;
      if (halt || t + 1 == series[i]->size()) {
        tr.tau = t + 1;
        tr.halted_by_policy = halt;
        h_tau[i] = ad::slice(state.h, 0, r, r + 1);
      } else {
        still.push_back(i);
        keep_rows.push_back(r);
      }
    }
    if (still.size() != a && !still.empty()) {
      std::vector<Tensor> hs, cs;
      for (std::size_t r : keep_rows) {
        hs.push_back(ad::slice(state.h, 0, r, r + 1));
        cs.push_back(ad::slice(state.c, 0, r, r + 1));
      }
      state.h = ad::concat(hs, 0);
      state.c = ad::concat(cs, 0);
    }
    active = std::move(still);
  }

  const Tensor probs = forward.class_probs(ad::concat(h_tau, 0));
  const std::size_t k = cfg.num_classes;
  for (std::size_t i = 0; i < batch; ++i) {
    EpisodeTrace& tr = out[i].trace;
    out[i].class_probs = ad::slice(probs, 0, i, i + 1);
    tr.class_probs.assign(probs.values().begin() + static_cast<std::ptrdiff_t>(i * k),
                          probs.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * k));
    tr.y_hat = static_cast<int>(argmax(tr.class_probs));
    tr.s = series[i]->snippets[tr.tau - 1].end;
    tr.length = series[i]->record_length;
  }
  return out;
}

EpisodeTrace rollout(const signal::SnippetSeries& series, const SpnModel& model, Rng& rng, ActionMode mode) {
  Forward forward(model, nullptr, nn::BatchNormMode::eval);
  const signal::SnippetSeries* one[] = {&series};
  return std::move(rollout_batch(forward, one, std::span<Rng>(&rng, 1), mode).front().trace);
}

double compute_reward(EpisodeTrace& trace, int true_label, const RewardConfig& config) {
  const bool correct = trace.y_hat == true_label;
  const auto tau = static_cast<double>(trace.tau);
  if (config.variant == RewardVariant::paper) {
    trace.total_reward = correct ? tau : -tau;
  } else {
    trace.total_reward = correct ? std::pow(config.gamma, tau - 1.0) : -1.0;
  }
  return trace.total_reward;
}

}  // namespace spn::model
