// SPDX-License-Identifier: Apache-2.0
#include "spn/signal/record.hpp"

#include <cmath>

#include "spn/util/errors.hpp"

namespace spn::signal {

void EcgRecord::validate(std::optional<std::size_t> num_classes) const {
  const std::string who = "record '" + record_id + "': ";
  if (channels == 0) throw ValidationError(who + "no channels");
  if (samples.size() % channels != 0) throw ValidationError(who + "channels have different lengths");
  if (!(sample_rate > 0.0)) throw ValidationError(who + "sample rate must be positive");
  if (static_cast<double>(length()) < sample_rate) {
    throw ValidationError(who + "needs at least one second of signal, got " + std::to_string(length()) +
                          " samples at " + std::to_string(sample_rate) + " Hz");
  }
  if (label < 0) throw ValidationError(who + "negative label");
  if (num_classes && static_cast<std::size_t>(label) >= *num_classes) {
    throw ValidationError(who + "label " + std::to_string(label) + " is not below class count " +
                          std::to_string(*num_classes));
  }
  for (double v : samples) {
    if (!std::isfinite(v)) throw ValidationError(who + "non-finite sample");
  }
}

void SnippetSeries::validate() const {
  const std::string who = "snippets of '" + record_id + "': ";
  for (std::size_t t = 0; t < snippets.size(); ++t) {
    const Snippet& s = snippets[t];
    if (s.values.size() != channels * width) throw ValidationError(who + "non-uniform snippet width");
    if (s.end <= s.start || s.end > record_length) throw ValidationError(who + "snippet outside the record");
    if (t > 0 && s.start <= snippets[t - 1].start) throw ValidationError(who + "starts not strictly increasing");
  }
}

}  // namespace spn::signal
