// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "spn/data/dataset.hpp"

namespace spn::data {

enum class OnsetPolicy {
  first_beat,  // class pattern present from the first beat
  uniform,     // onset beat uniform over the leading onset_max_fraction of beats
};

/// Quasi-periodic multichannel pulse trains with a class-specific morphology
/// change that starts at some beat and persists to the end of the record.
struct SynthConfig {
  std::size_t n_records = 600;
  std::size_t num_classes = 3;
  std::size_t channels = 2;
  double sample_rate = 100.0;
  double min_seconds = 6.0;
  double max_seconds = 60.0;
  double min_bpm = 60.0;
  double max_bpm = 90.0;
  double rr_jitter = 0.05;          // relative std of beat-to-beat intervals
  double pattern_amplitude = 0.4;   // peak height of the class perturbation
  double noise_sigma = 0.05;        // white noise std, same units as R height 1
  double baseline_wander = 0.1;     // amplitude of a slow sinusoidal drift
  OnsetPolicy onset = OnsetPolicy::uniform;
  double onset_max_fraction = 0.5;
  std::uint64_t seed = 1;

  /// 20 log10(pattern_amplitude / noise_sigma).
  double snr_db() const;
  void validate() const;
};

struct SynthDataset {
  Dataset dataset;
  std::vector<std::vector<std::size_t>> peaks;  // ground-truth R-peak samples
  std::vector<std::size_t> onset_beats;         // first perturbed beat index
};

SynthDataset synth_dataset(const SynthConfig& config);

/// Class perturbation added to a beat: amplitude, offset from the R peak and
/// width (seconds). Exposed so tests can build template oracles.
struct Perturbation {
  double amplitude;
  double offset_s;
  double width_s;
};
Perturbation class_perturbation(std::size_t label, std::size_t num_classes, double amplitude);

/// Noise-free beat shape (before channel gain) at `dt` seconds from the R peak.
double beat_waveform(double dt);

/// Relative gain of channel c (channel 0 has gain 1).
double channel_gain(std::size_t c);

}  // namespace spn::data
