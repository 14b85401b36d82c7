// SPDX-License-Identifier: Apache-2.0
#include "spn/data/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "spn/util/errors.hpp"
#include "spn/util/rng.hpp"

namespace spn::data {

double SynthConfig::snr_db() const { return 20.0 * std::log10(pattern_amplitude / noise_sigma); }

void SynthConfig::validate() const {
  if (num_classes < 2) throw ValidationError("synth: need at least 2 classes");
  if (channels < 1) throw ValidationError("synth: need at least 1 channel");
  if (!(sample_rate > 0.0)) throw ValidationError("synth: sample rate must be positive");
  if (!(min_seconds >= 1.0) || !(max_seconds >= min_seconds)) {
    throw ValidationError("synth: length range must satisfy 1 <= min_seconds <= max_seconds");
  }
  if (!(min_bpm > 0.0) || !(max_bpm >= min_bpm)) throw ValidationError("synth: invalid beat rate range");
  if (!(rr_jitter >= 0.0 && rr_jitter < 0.5)) throw ValidationError("synth: rr_jitter must lie in [0, 0.5)");
  if (!(pattern_amplitude >= 0.0) || !(noise_sigma >= 0.0) || !(baseline_wander >= 0.0)) {
    throw ValidationError("synth: amplitudes must be non-negative");
  }
  if (!(onset_max_fraction >= 0.0 && onset_max_fraction <= 1.0)) {
    throw ValidationError("synth: onset_max_fraction must lie in [0, 1]");
  }
}

Perturbation class_perturbation(std::size_t label, std::size_t num_classes, double amplitude) {
  const double sign = label % 2 == 0 ? 1.0 : -1.0;
  return {sign * amplitude, 0.1 + 0.3 * static_cast<double>(label) / static_cast<double>(num_classes), 0.03};
}

double channel_gain(std::size_t c) { return 1.0 / (1.0 + 0.3 * static_cast<double>(c)); }

namespace {

struct Bump {
  double amplitude;
  double offset_s;
  double width_s;
};

// P, R, S and T waves relative to the R peak.
constexpr Bump kBeat[] = {{0.15, -0.16, 0.025}, {1.0, 0.0, 0.010}, {-0.2, 0.03, 0.012}, {0.3, 0.25, 0.04}};

void add_bump(std::vector<double>& x, double rate, double center_s, const Bump& b) {
  const double center = (center_s + b.offset_s) * rate;
  const double sigma = b.width_s * rate;
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::floor(center - 5.0 * sigma)));
  const auto hi = std::min<std::ptrdiff_t>(n - 1, static_cast<std::ptrdiff_t>(std::ceil(center + 5.0 * sigma)));
  for (std::ptrdiff_t i = lo; i <= hi; ++i) {
    const double z = (static_cast<double>(i) - center) / sigma;
    x[static_cast<std::size_t>(i)] += b.amplitude * std::exp(-0.5 * z * z);
  }
}

}  // namespace

double beat_waveform(double dt) {
  double v = 0.0;
  for (const Bump& b : kBeat) {
    const double z = (dt - b.offset_s) / b.width_s;
    v += b.amplitude * std::exp(-0.5 * z * z);
  }
  return v;
}

SynthDataset synth_dataset(const SynthConfig& config) {
  config.validate();
  SynthDataset out;
  out.dataset.sample_rate = config.sample_rate;
  for (std::size_t k = 0; k < config.num_classes; ++k) out.dataset.class_names.push_back("class" + std::to_string(k));

  const double rate = config.sample_rate;
  for (std::size_t r = 0; r < config.n_records; ++r) {
    Rng rng(Rng::derive(config.seed, "synth", r));
    const int label = static_cast<int>(rng.below(config.num_classes));
    const double seconds = rng.uniform(config.min_seconds, config.max_seconds);
    const auto length = static_cast<std::size_t>(std::lround(seconds * rate));
    const double mean_rr = 60.0 / rng.uniform(config.min_bpm, config.max_bpm);

    // Beat times; beats slightly past the end still contribute their leading waves.
    std::vector<double> beat_times;
    double t = 0.2 + rng.uniform() * mean_rr;
    const double end_s = static_cast<double>(length) / rate;
    while (t < end_s + 0.3) {
      beat_times.push_back(t);
      const double rr = mean_rr * (1.0 + config.rr_jitter * rng.normal());
      t += std::max(0.3, rr);
    }
    std::vector<std::size_t> peaks;
    for (double bt : beat_times) {
      const auto p = static_cast<std::size_t>(std::lround(bt * rate));
      if (p < length) peaks.push_back(p);
    }
    std::size_t onset = 0;
    if (config.onset == OnsetPolicy::uniform && !peaks.empty()) {
      const auto span = static_cast<std::size_t>(std::floor(config.onset_max_fraction * static_cast<double>(peaks.size())));
      onset = rng.below(span + 1);
      onset = std::min(onset, peaks.size() - 1);
    }

    std::vector<double> clean(length, 0.0);
    const Perturbation pert = class_perturbation(static_cast<std::size_t>(label), config.num_classes,
                                                 config.pattern_amplitude);
    for (std::size_t b = 0; b < beat_times.size(); ++b) {
      for (const Bump& wave : kBeat) add_bump(clean, rate, beat_times[b], wave);
      if (b >= onset && pert.amplitude != 0.0) {
        add_bump(clean, rate, beat_times[b], Bump{pert.amplitude, pert.offset_s, pert.width_s});
      }
    }
    const double wander_hz = rng.uniform(0.1, 0.3);
    const double wander_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

    signal::EcgRecord record;
    record.channels = config.channels;
    record.sample_rate = rate;
    record.label = label;
    char id[32];
    std::snprintf(id, sizeof(id), "rec%05zu", r);
    record.record_id = id;
    record.samples.resize(config.channels * length);
    for (std::size_t c = 0; c < config.channels; ++c) {
      const double gain = channel_gain(c);
      auto ch = record.channel(c);
      for (std::size_t i = 0; i < length; ++i) {
        const double ts = static_cast<double>(i) / rate;
        const double wander = config.baseline_wander * std::sin(2.0 * std::numbers::pi * wander_hz * ts + wander_phase);
        ch[i] = gain * clean[i] + wander + config.noise_sigma * rng.normal();
      }
    }
    out.dataset.records.push_back(std::move(record));
    out.peaks.push_back(std::move(peaks));
    out.onset_beats.push_back(onset);
  }
  return out;
}

}  // namespace spn::data
