// SPDX-License-Identifier: Apache-2.0
#include "spn/app/run_config.hpp"

#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "spn/data/dataset.hpp"
#include "spn/util/errors.hpp"
#include "spn/util/kv_config.hpp"
#include "spn/util/rng.hpp"

namespace spn::app {

namespace {

const std::set<std::string> kKnownKeys = {
    "seed",
    "data.manifest",
    "data.test_manifest",
    "data.validation_fraction",
    "snippets.lead",
    "snippets.fallback_window_seconds",
    "snippets.normalize",
    "model.input_channels",
    "model.block_layers",
    "model.block_channels",
    "model.hidden",
    "model.snippet_width",
    "model.num_classes",
    "model.policy_bias_init",
    "train.epochs",
    "train.batch_size",
    "train.base_lr",
    "train.lr_divisor",
    "train.lr_every_epochs",
    "train.lambda_policy",
    "train.baseline_momentum",
    "train.clip_norm",
    "train.folds",
    "reward.variant",
    "reward.gamma",
    "eval.mode",
    "synth.n_records",
    "synth.num_classes",
    "synth.channels",
    "synth.sample_rate",
    "synth.min_seconds",
    "synth.max_seconds",
    "synth.min_bpm",
    "synth.max_bpm",
    "synth.rr_jitter",
    "synth.pattern_amplitude",
    "synth.noise_sigma",
    "synth.baseline_wander",
    "synth.onset",
    "synth.onset_max_fraction",
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  if (value.empty()) return {};
  const std::filesystem::path p(value);
  return p.is_absolute() || base.empty() ? p : base / p;
}

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string join(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + std::to_string(values[i]);
  return out;
}

std::size_t get_size(const KeyValueConfig& kv, const std::string& key, std::size_t fallback) {
  const std::int64_t v = kv.get_int(key, static_cast<std::int64_t>(fallback));
  if (v < 0) throw ValidationError(kv.origin() + ": key '" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

data::OnsetPolicy parse_onset(const std::string& text) {
  if (text == "first") return data::OnsetPolicy::first_beat;
  if (text == "uniform") return data::OnsetPolicy::uniform;
  throw ValidationError("unknown onset policy '" + text + "' (expected first|uniform)");
}

const char* to_string(data::OnsetPolicy policy) {
  return policy == data::OnsetPolicy::first_beat ? "first" : "uniform";
}

void RunConfig::set_seed(std::uint64_t value) {
  seed = value;
  train.seed = value;
  synth.seed = value;
}

void RunConfig::validate() const {
  train.validate();
  synth.validate();
  if (!(data.validation_fraction >= 0.0 && data.validation_fraction < 1.0)) {
    throw ValidationError("data.validation_fraction must lie in [0, 1)");
  }
  if (data.snippets.detector.lead >= train.model.input_channels) {
    throw ValidationError("snippets.lead must be below model.input_channels");
  }
}

namespace {

RunConfig from_key_values(const KeyValueConfig& kv, const std::filesystem::path& base_dir) {
  kv.reject_unknown(kKnownKeys);
  RunConfig c;

  c.data.manifest = resolve(base_dir, kv.get_string("data.manifest", ""));
  c.data.test_manifest = resolve(base_dir, kv.get_string("data.test_manifest", ""));
  c.data.validation_fraction = kv.get_double("data.validation_fraction", c.data.validation_fraction);
  c.data.snippets.detector.lead = get_size(kv, "snippets.lead", c.data.snippets.detector.lead);
  c.data.snippets.fallback_window_seconds =
      kv.get_double("snippets.fallback_window_seconds", c.data.snippets.fallback_window_seconds);
  c.data.snippets.normalize = kv.get_bool("snippets.normalize", c.data.snippets.normalize);

  model::ModelConfig& m = c.train.model;
  m.input_channels = get_size(kv, "model.input_channels", m.input_channels);
  m.block_layers = kv.get_sizes("model.block_layers", m.block_layers);
  m.block_channels = kv.get_sizes("model.block_channels", m.block_channels);
  m.hidden = get_size(kv, "model.hidden", m.hidden);
  m.snippet_width = get_size(kv, "model.snippet_width", m.snippet_width);
  m.num_classes = get_size(kv, "model.num_classes", m.num_classes);
  m.policy_bias_init = kv.get_double("model.policy_bias_init", m.policy_bias_init);
  c.data.snippets.width = m.snippet_width;

  train::TrainConfig& t = c.train;
  t.epochs = get_size(kv, "train.epochs", t.epochs);
  t.batch_size = get_size(kv, "train.batch_size", t.batch_size);
  t.base_lr = kv.get_double("train.base_lr", t.base_lr);
  t.lr_divisor = kv.get_double("train.lr_divisor", t.lr_divisor);
  t.lr_every_epochs = static_cast<int>(kv.get_int("train.lr_every_epochs", t.lr_every_epochs));
  t.lambda_policy = kv.get_double("train.lambda_policy", t.lambda_policy);
  t.baseline_momentum = kv.get_double("train.baseline_momentum", t.baseline_momentum);
  t.clip_norm = kv.get_double("train.clip_norm", t.clip_norm);
  t.folds = get_size(kv, "train.folds", t.folds);
  t.reward.variant = model::parse_reward_variant(kv.get_string("reward.variant", model::to_string(t.reward.variant)));
  t.reward.gamma = kv.get_double("reward.gamma", t.reward.gamma);
  c.eval_mode = model::parse_action_mode(kv.get_string("eval.mode", model::to_string(c.eval_mode)));
  if (c.eval_mode == model::ActionMode::never_halt) throw ValidationError("eval.mode must be stochastic or thresholded");

  data::SynthConfig& s = c.synth;
  s.n_records = get_size(kv, "synth.n_records", s.n_records);
  s.num_classes = get_size(kv, "synth.num_classes", m.num_classes);
  s.channels = get_size(kv, "synth.channels", m.input_channels);
  s.sample_rate = kv.get_double("synth.sample_rate", s.sample_rate);
  s.min_seconds = kv.get_double("synth.min_seconds", s.min_seconds);
  s.max_seconds = kv.get_double("synth.max_seconds", s.max_seconds);
  s.min_bpm = kv.get_double("synth.min_bpm", s.min_bpm);
  s.max_bpm = kv.get_double("synth.max_bpm", s.max_bpm);
  s.rr_jitter = kv.get_double("synth.rr_jitter", s.rr_jitter);
  s.pattern_amplitude = kv.get_double("synth.pattern_amplitude", s.pattern_amplitude);
  s.noise_sigma = kv.get_double("synth.noise_sigma", s.noise_sigma);
  s.baseline_wander = kv.get_double("synth.baseline_wander", s.baseline_wander);
  s.onset = parse_onset(kv.get_string("synth.onset", to_string(s.onset)));
  s.onset_max_fraction = kv.get_double("synth.onset_max_fraction", s.onset_max_fraction);

  c.set_seed(kv.get_u64("seed", c.seed));
  c.validate();
  return c;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& origin, const std::filesystem::path& base_dir) {
  RunConfig c = from_key_values(KeyValueConfig::parse(text, origin), base_dir);
  c.source = origin;
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig c = from_key_values(KeyValueConfig::load(path), path.parent_path());
  c.source = path;
  return c;
}

std::string to_config_text(const RunConfig& c) {
  const model::ModelConfig& m = c.train.model;
  const train::TrainConfig& t = c.train;
  const data::SynthConfig& s = c.synth;
  std::ostringstream out;
  out << "seed = " << c.seed << "\n";
  out << "data.manifest = " << c.data.manifest.string() << "\n";
  out << "data.test_manifest = " << c.data.test_manifest.string() << "\n";
  out << "data.validation_fraction = " << num(c.data.validation_fraction) << "\n";
  out << "snippets.lead = " << c.data.snippets.detector.lead << "\n";
  out << "snippets.fallback_window_seconds = " << num(c.data.snippets.fallback_window_seconds) << "\n";
  out << "snippets.normalize = " << (c.data.snippets.normalize ? "true" : "false") << "\n";
  out << "model.input_channels = " << m.input_channels << "\n";
  out << "model.block_layers = " << join(m.block_layers) << "\n";
  out << "model.block_channels = " << join(m.block_channels) << "\n";
  out << "model.hidden = " << m.hidden << "\n";
  out << "model.snippet_width = " << m.snippet_width << "\n";
  out << "model.num_classes = " << m.num_classes << "\n";
  out << "model.policy_bias_init = " << num(m.policy_bias_init) << "\n";
  out << "train.epochs = " << t.epochs << "\n";
  out << "train.batch_size = " << t.batch_size << "\n";
  out << "train.base_lr = " << num(t.base_lr) << "\n";
  out << "train.lr_divisor = " << num(t.lr_divisor) << "\n";
  out << "train.lr_every_epochs = " << t.lr_every_epochs << "\n";
  out << "train.lambda_policy = " << num(t.lambda_policy) << "\n";
  out << "train.baseline_momentum = " << num(t.baseline_momentum) << "\n";
  out << "train.clip_norm = " << num(t.clip_norm) << "\n";
  out << "train.folds = " << t.folds << "\n";
  out << "reward.variant = " << model::to_string(t.reward.variant) << "\n";
  out << "reward.gamma = " << num(t.reward.gamma) << "\n";
  out << "eval.mode = " << model::to_string(c.eval_mode) << "\n";
  out << "synth.n_records = " << s.n_records << "\n";
  out << "synth.num_classes = " << s.num_classes << "\n";
  out << "synth.channels = " << s.channels << "\n";
  out << "synth.sample_rate = " << num(s.sample_rate) << "\n";
  out << "synth.min_seconds = " << num(s.min_seconds) << "\n";
  out << "synth.max_seconds = " << num(s.max_seconds) << "\n";
  out << "synth.min_bpm = " << num(s.min_bpm) << "\n";
  out << "synth.max_bpm = " << num(s.max_bpm) << "\n";
  out << "synth.rr_jitter = " << num(s.rr_jitter) << "\n";
  out << "synth.pattern_amplitude = " << num(s.pattern_amplitude) << "\n";
  out << "synth.noise_sigma = " << num(s.noise_sigma) << "\n";
  out << "synth.baseline_wander = " << num(s.baseline_wander) << "\n";
  out << "synth.onset = " << to_string(s.onset) << "\n";
  out << "synth.onset_max_fraction = " << num(s.onset_max_fraction) << "\n";
  return out.str();
}

std::vector<signal::SnippetSeries> load_series(const std::filesystem::path& manifest, const RunConfig& config,
                                               std::vector<std::string>* class_names) {
  const data::Dataset ds = data::load_manifest(manifest);
  const model::ModelConfig& m = config.train.model;
  if (ds.num_classes() != m.num_classes) {
    throw ValidationError(manifest.string() + ": dataset has " + std::to_string(ds.num_classes()) +
                          " classes, model.num_classes is " + std::to_string(m.num_classes));
  }
  std::vector<signal::SnippetSeries> out;
  out.reserve(ds.size());
  for (const signal::EcgRecord& r : ds.records) {
    if (r.channels != m.input_channels) {
      throw ValidationError(manifest.string() + ": record " + r.record_id + " has " + std::to_string(r.channels) +
                            " channels, model.input_channels is " + std::to_string(m.input_channels));
    }
    out.push_back(signal::make_snippets(r, config.data.snippets));
  }
  if (class_names) *class_names = ds.class_names;
  return out;
}

PreparedData prepare_training_data(const RunConfig& config) {
  if (config.data.manifest.empty()) throw ValidationError("data.manifest is required for this command");
  PreparedData out;
  std::vector<signal::SnippetSeries> all = load_series(config.data.manifest, config, &out.class_names);
  std::vector<std::vector<std::size_t>> by_class(config.train.model.num_classes);
  for (std::size_t i = 0; i < all.size(); ++i) by_class[static_cast<std::size_t>(all[i].label)].push_back(i);
  Rng rng(Rng::derive(config.seed, "split"));
  std::vector<bool> held_out(all.size(), false);
  for (auto& members : by_class) {
    rng.shuffle(std::span<std::size_t>(members));
    const auto n_val = static_cast<std::size_t>(
        std::llround(config.data.validation_fraction * static_cast<double>(members.size())));
    for (std::size_t j = 0; j < n_val; ++j) held_out[members[j]] = true;
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    (held_out[i] ? out.validation : out.train).push_back(std::move(all[i]));
  }
  return out;
}

}  // namespace spn::app
