// SPDX-License-Identifier: Apache-2.0
// spn: command-line entry points for data synthesis, training, evaluation,
// gradient checking and cross-validation.
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "spn/app/commands.hpp"
#include "spn/util/parallel.hpp"

namespace {

using spn::app::CommandOptions;

struct Flags {
  std::string config, out = ".", checkpoint, data, corrupt, mode, reward;
  std::uint64_t seed = 0;
  double fraction = 1.0;
};

bool given(const CLI::App& sub, const std::string& name) {
  const CLI::Option* opt = sub.get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

CommandOptions to_options(const CLI::App& sub, const Flags& f) {
  CommandOptions o;
  if (!f.config.empty()) o.config = f.config;
  o.out = f.out;
  if (given(sub, "--seed")) o.seed = f.seed;
  if (!f.mode.empty()) o.mode = spn::model::parse_action_mode(f.mode);
  if (!f.reward.empty()) o.reward = spn::model::parse_reward_variant(f.reward);
  if (given(sub, "--fraction")) o.fraction = f.fraction;
  if (!f.checkpoint.empty()) o.checkpoint = f.checkpoint;
  if (!f.data.empty()) o.data = f.data;
  o.corrupt_op = f.corrupt;
  o.workers = spn::worker_count();
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Snippet policy network: early classification of multichannel ECG"};
  app.require_subcommand(1);
  Flags flags;

  auto common = [&](CLI::App* sub, bool needs_config) {
    auto* cfg = sub->add_option("--config", flags.config, "Run configuration (key = value file)");
    if (needs_config) cfg->required();
    sub->add_option("--out", flags.out, "Output directory")->capture_default_str();
    sub->add_option("--seed", flags.seed, "Override the config seed");
  };
  const std::vector<std::string> modes{"stochastic", "thresholded"};
  const std::vector<std::string> rewards{"paper", "latency"};

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset (CSV records plus manifest.json)");
  common(synth, false);

  auto* train = app.add_subcommand("train", "Train a model: checkpoint, history table and validation report");
  common(train, true);
  train->add_option("--mode", flags.mode, "Action mode of the final validation report")
      ->check(CLI::IsMember(modes));
  train->add_option("--reward", flags.reward, "Reward variant")->check(CLI::IsMember(rewards));

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint, or the fixed-fraction baseline");
  common(eval, true);
  eval->add_option("--checkpoint", flags.checkpoint, "Trained parameters");
  eval->add_option("--data", flags.data, "Dataset manifest to evaluate (default: config test set)");
  eval->add_option("--mode", flags.mode, "Action mode")->check(CLI::IsMember(modes));
  eval->add_option("--reward", flags.reward, "Reward variant")->check(CLI::IsMember(rewards));
  eval->add_option("--fraction", flags.fraction, "Train and score the fixed-fraction baseline instead")
      ->check(CLI::Range(0.0, 1.0));

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every layer and the episode loss");
  grad->add_option("--out", flags.out, "Output directory")->capture_default_str();
  grad->add_option("--corrupt", flags.corrupt, "Perturb the backward rule of this primitive (debug)");

  auto* cv = app.add_subcommand("crossval", "Stratified k-fold cross-validation (train.folds)");
  common(cv, true);
  cv->add_option("--reward", flags.reward, "Reward variant")->check(CLI::IsMember(rewards));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : spn::app::kExitUsage;
  }

  return spn::app::run_guarded(
      [&]() -> int {
        if (*synth) {
          spn::app::cmd_synth(to_options(*synth, flags), std::cout);
        } else if (*train) {
          spn::app::cmd_train(to_options(*train, flags), std::cout);
        } else if (*eval) {
          spn::app::cmd_eval(to_options(*eval, flags), std::cout);
        } else if (*grad) {
          return spn::app::cmd_gradcheck(to_options(*grad, flags), std::cout) ? spn::app::kExitOk
                                                                               : spn::app::kExitNumeric;
        } else if (*cv) {
          spn::app::cmd_crossval(to_options(*cv, flags), std::cout);
        }
        return spn::app::kExitOk;
      },
      std::cerr);
}
