// SPDX-License-Identifier: Apache-2.0
#include "spn/signal/snippets.hpp"

#include <cmath>

#include "spn/util/errors.hpp"

namespace spn::signal {

std::vector<double> resample_segment(std::span<const double> segment, std::size_t channels, std::size_t width) {
  if (channels == 0 || segment.size() % channels != 0) {
    throw UsageError("resample_segment: segment size is not a multiple of the channel count");
  }
  const std::size_t n = segment.size() / channels;
  if (n < 2) throw UsageError("resample_segment: segment needs at least 2 samples, got " + std::to_string(n));
  if (width < 2) throw UsageError("resample_segment: target width must be at least 2");
  std::vector<double> out(channels * width);
  const double step = static_cast<double>(n - 1) / static_cast<double>(width - 1);
  for (std::size_t c = 0; c < channels; ++c) {
    const double* src = segment.data() + c * n;
    double* dst = out.data() + c * width;
    for (std::size_t j = 0; j < width; ++j) {
      const double pos = static_cast<double>(j) * step;
      const std::size_t k = std::min(static_cast<std::size_t>(pos), n - 2);
      const double frac = pos - static_cast<double>(k);
      dst[j] = frac == 0.0 ? src[k] : src[k] + frac * (src[k + 1] - src[k]);
    }
    dst[width - 1] = src[n - 1];
  }
  return out;
}

EcgRecord zscore(const EcgRecord& record) {
  EcgRecord out = record;
  const std::size_t n = record.length();
  for (std::size_t c = 0; c < record.channels; ++c) {
    auto x = out.channel(c);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (double& v : x) v = sd > 0.0 ? (v - mean) / sd : 0.0;
  }
  return out;
}

namespace {

SnippetSeries empty_series(const EcgRecord& record, std::size_t width) {
  SnippetSeries series;
  series.channels = record.channels;
  series.width = width;
  series.record_id = record.record_id;
  series.label = record.label;
  series.record_length = record.length();
  return series;
}

Snippet cut(const EcgRecord& record, std::size_t start, std::size_t end, std::size_t width) {
  const std::size_t n = end - start;
  std::vector<double> segment(record.channels * n);
  for (std::size_t c = 0; c < record.channels; ++c) {
    auto ch = record.channel(c);
    std::copy(ch.begin() + static_cast<std::ptrdiff_t>(start), ch.begin() + static_cast<std::ptrdiff_t>(end),
              segment.begin() + static_cast<std::ptrdiff_t>(c * n));
  }
  return Snippet{resample_segment(segment, record.channels, width), start, end};
}

}  // namespace

SnippetSeries segment(const EcgRecord& record, std::span<const std::size_t> peaks, std::size_t width) {
  if (peaks.size() < 2) {
    throw UsageError("segment: need at least 2 peaks, got " + std::to_string(peaks.size()) +
                     "; use fallback_fixed_windows");
  }
  SnippetSeries series = empty_series(record, width);
  for (std::size_t i = 0; i + 1 < peaks.size(); ++i) {
    if (peaks[i + 1] <= peaks[i] || peaks[i + 1] > record.length()) {
      throw UsageError("segment: peaks must be strictly increasing and inside the record");
    }
    series.snippets.push_back(cut(record, peaks[i], peaks[i + 1], width));
  }
  return series;
}

SnippetSeries fallback_fixed_windows(const EcgRecord& record, double window_seconds, std::size_t width) {
  const auto window = static_cast<std::size_t>(std::lround(window_seconds * record.sample_rate));
  if (window < 2 || record.length() < window) {
    throw ValidationError("record '" + record.record_id + "' rejected: " + std::to_string(record.length()) +
                          " samples is shorter than one " + std::to_string(window_seconds) + " s window");
  }
  SnippetSeries series = empty_series(record, width);
  series.from_fallback = true;
  for (std::size_t start = 0; start + window <= record.length(); start += window) {
    series.snippets.push_back(cut(record, start, start + window, width));
  }
  return series;
}

SnippetSeries make_snippets(const EcgRecord& record, const SnippetOptions& options) {
  const EcgRecord prepared = options.normalize ? zscore(record) : record;
  const BeatDetection beats = detect_beats(prepared, options.detector);
  if (beats.fallback_needed()) {
    return fallback_fixed_windows(prepared, options.fallback_window_seconds, options.width);
  }
  return segment(prepared, beats.peaks, options.width);
}

}  // namespace spn::signal
