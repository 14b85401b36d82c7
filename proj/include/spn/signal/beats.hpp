// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "spn/signal/record.hpp"

namespace spn::signal {

/// Energy-envelope R-peak detector settings.
///
/// The lead is detrended with a centered moving average, low-passed with a
/// short moving average, differentiated and squared, then smoothed over the
/// integration window. Local maxima of that
/// envelope above `threshold_ratio` times a running peak estimate (which
/// decays exponentially between beats) are beats; the R-peak is placed at the
/// largest absolute deflection near the envelope maximum.
struct DetectorOptions {
  std::size_t lead = 0;
  double detrend_ms = 150.0;
  // Low-pass moving average applied before differentiation; 0 disables it.
  double smoothing_ms = 30.0;
  double integration_ms = 80.0;
  double threshold_ratio = 0.5;
  double peak_decay_seconds = 4.0;
  double refractory_ms = 200.0;
  // The running peak estimate starts from the envelope maximum over this span.
  double warmup_seconds = 2.0;
};

struct BeatDetection {
  std::vector<std::size_t> peaks;

  /// Fewer than two beats: the record cannot be cut peak to peak.
  bool fallback_needed() const { return peaks.size() < 2; }
};

BeatDetection detect_beats(const EcgRecord& record, const DetectorOptions& options = {});

}  // namespace spn::signal
