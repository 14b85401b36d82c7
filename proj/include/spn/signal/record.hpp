// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spn::signal {

/// One labeled multichannel recording. Samples are channel-major:
/// samples[c * length + i] is sample i of channel c.
struct EcgRecord {
  std::vector<double> samples;
  std::size_t channels = 0;
  double sample_rate = 0.0;
  int label = 0;
  std::string record_id;

  std::size_t length() const { return channels == 0 ? 0 : samples.size() / channels; }
  std::span<const double> channel(std::size_t c) const {
    return std::span<const double>(samples).subspan(c * length(), length());
  }
  std::span<double> channel(std::size_t c) { return std::span<double>(samples).subspan(c * length(), length()); }

  /// Throws ValidationError when an invariant fails: at least one channel,
  /// equal channel lengths, at least one second of signal, finite values and
  /// (when given) label < num_classes.
  void validate(std::optional<std::size_t> num_classes = std::nullopt) const;
};

struct Snippet {
  std::vector<double> values;  // [channels x width], channel-major
  std::size_t start = 0;       // first source sample
  std::size_t end = 0;         // one past the last source sample
};

/// Chronologically ordered, equal-width snippets cut from one record.
struct SnippetSeries {
  std::vector<Snippet> snippets;
  std::size_t channels = 0;
  std::size_t width = 0;
  std::string record_id;
  int label = 0;
  std::size_t record_length = 0;
  bool from_fallback = false;

  std::size_t size() const { return snippets.size(); }
  /// Throws ValidationError unless widths are uniform, starts strictly
  /// increase and every end lies within the record.
  void validate() const;
};

}  // namespace spn::signal
