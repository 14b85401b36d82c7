// SPDX-License-Identifier: Apache-2.0
#include "spn/signal/beats.hpp"

#include <algorithm>
#include <cmath>

#include "spn/util/errors.hpp"

namespace spn::signal {

namespace {

std::size_t samples_for(double ms, double rate) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(ms * 1e-3 * rate)));
}

// Centered moving average with the window truncated at the edges.
std::vector<double> moving_average(std::span<const double> x, std::size_t window) {
  const std::size_t n = x.size();
  const std::size_t half = window / 2;
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half + 1);
    out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

}  // namespace

BeatDetection detect_beats(const EcgRecord& record, const DetectorOptions& options) {
  if (options.lead >= record.channels) {
    throw UsageError("detect_beats: lead " + std::to_string(options.lead) + " not present in record '" +
                     record.record_id + "'");
  }
  const double rate = record.sample_rate;
  std::span<const double> lead = record.channel(options.lead);
  const std::size_t n = lead.size();
  BeatDetection result;
  if (n < 3) return result;

  const std::vector<double> trend = moving_average(lead, samples_for(options.detrend_ms, rate));
  std::vector<double> detrended(n);
  for (std::size_t i = 0; i < n; ++i) detrended[i] = lead[i] - trend[i];
  const std::vector<double> smoothed =
      options.smoothing_ms > 0.0 ? moving_average(detrended, samples_for(options.smoothing_ms, rate)) : detrended;

  std::vector<double> slope_sq(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double d = 0.5 * (smoothed[i + 1] - smoothed[i - 1]);
    slope_sq[i] = d * d;
  }
  const std::size_t integration = samples_for(options.integration_ms, rate);
  const std::vector<double> energy = moving_average(slope_sq, integration);

  const double global_max = *std::max_element(energy.begin(), energy.end());
  if (!(global_max > 1e-300)) return result;  // flat signal

  const std::size_t warmup = std::min(n, std::max<std::size_t>(1, static_cast<std::size_t>(options.warmup_seconds * rate)));
  double peak_estimate = *std::max_element(energy.begin(), energy.begin() + static_cast<std::ptrdiff_t>(warmup));
  std::size_t estimate_at = 0;
  const double decay_per_sample = 1.0 / (options.peak_decay_seconds * rate);
  const std::size_t refractory = samples_for(options.refractory_ms, rate);
  const std::size_t search = integration / 2 + 1;

  std::vector<double> accepted_energy;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(energy[i] >= energy[i - 1] && energy[i] > energy[i + 1])) continue;
    const double decayed = peak_estimate * std::exp(-static_cast<double>(i - estimate_at) * decay_per_sample);
    if (energy[i] < options.threshold_ratio * decayed) continue;

    // The envelope is centered, so the R deflection sits near its maximum.
    const std::size_t lo = i >= search ? i - search : 0;
    const std::size_t hi = std::min(n - 1, i + search);
    std::size_t r = lo;
    for (std::size_t j = lo + 1; j <= hi; ++j) {
      if (std::abs(detrended[j]) > std::abs(detrended[r])) r = j;
    }

    auto& peaks = result.peaks;
    if (!peaks.empty() && r < peaks.back() + refractory) {
      // Within the refractory period of the previous beat: keep the stronger.
      const bool ordered = peaks.size() < 2 || r >= peaks[peaks.size() - 2] + refractory;
      if (energy[i] > accepted_energy.back() && ordered) {
        peaks.back() = r;
        accepted_energy.back() = energy[i];
        peak_estimate = std::max(decayed, energy[i]);
        estimate_at = i;
      }
      continue;
    }
    peaks.push_back(r);
    accepted_energy.push_back(energy[i]);
    peak_estimate = std::max(decayed, energy[i]);
    estimate_at = i;
  }
  return result;
}

}  // namespace spn::signal
