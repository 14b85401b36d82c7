// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "spn/signal/beats.hpp"
#include "spn/signal/record.hpp"

namespace spn::signal {

inline constexpr std::size_t kDefaultSnippetWidth = 243;

struct SnippetOptions {
  std::size_t width = kDefaultSnippetWidth;
  DetectorOptions detector;
  double fallback_window_seconds = 0.8;
  bool normalize = true;
};

/// Linear interpolation of each channel of a [channels x n] segment onto
/// `width` evenly spaced points; first and last samples are kept exactly.
std::vector<double> resample_segment(std::span<const double> segment, std::size_t channels, std::size_t width);

/// Per-channel z-score over the whole record. Constant channels become zero.
EcgRecord zscore(const EcgRecord& record);

/// One snippet per consecutive peak pair: samples [p_i, p_{i+1}).
SnippetSeries segment(const EcgRecord& record, std::span<const std::size_t> peaks, std::size_t width);

/// Consecutive non-overlapping windows of `window_seconds`; a partial tail is
/// dropped. Records shorter than one window are rejected (ValidationError).
SnippetSeries fallback_fixed_windows(const EcgRecord& record, double window_seconds, std::size_t width);

/// Full snippet generator: optional z-score, beat detection, peak-to-peak
/// segmentation, and fixed windows when fewer than two beats are found.
SnippetSeries make_snippets(const EcgRecord& record, const SnippetOptions& options = {});

}  // namespace spn::signal
