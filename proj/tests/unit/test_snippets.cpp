// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include "doctest.h"
#include "spn/data/synth.hpp"
#include "spn/signal/beats.hpp"
#include "spn/signal/snippets.hpp"
#include "spn/util/errors.hpp"
#include "spn/util/rng.hpp"

using namespace spn;
using namespace spn::signal;

namespace {

EcgRecord pulse_record(double rate, double seconds, const std::vector<std::pair<double, double>>& pulses,
                       std::size_t channels = 1) {
  EcgRecord r;
  r.channels = channels;
  r.sample_rate = rate;
  r.record_id = "pulses";
  const auto n = static_cast<std::size_t>(std::lround(rate * seconds));
  r.samples.assign(channels * n, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    auto ch = r.channel(c);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / rate;
      for (auto [at, amp] : pulses) ch[i] += amp * std::exp(-0.5 * std::pow((t - at) / 0.01, 2));
    }
  }
  return r;
}

void check_series(const SnippetSeries& s, const EcgRecord& r, std::size_t width) {
  REQUIRE(s.size() >= 1);
  CHECK(s.label == r.label);
  CHECK(s.width == width);
  CHECK(s.record_length == r.length());
  for (std::size_t t = 0; t < s.size(); ++t) {
    CHECK(s.snippets[t].values.size() == r.channels * width);
    CHECK(s.snippets[t].end <= r.length());
    CHECK(s.snippets[t].start < s.snippets[t].end);
    if (t > 0) CHECK(s.snippets[t].start > s.snippets[t - 1].start);
  }
  CHECK_NOTHROW(s.validate());
}

}  // namespace

TEST_CASE("1 Hz pulse train at 500 Hz gives ten peaks near the truth") {
  std::vector<std::pair<double, double>> pulses;
  for (int i = 0; i < 10; ++i) pulses.emplace_back(0.5 + i, 1.0);
  const EcgRecord r = pulse_record(500.0, 10.0, pulses);
  const BeatDetection d = detect_beats(r);
  REQUIRE(d.peaks.size() == 10);
  for (int i = 0; i < 10; ++i) {
    CHECK(std::abs(static_cast<double>(d.peaks[i]) - (0.5 + i) * 500.0) <= 25.0);
  }
  CHECK_FALSE(d.fallback_needed());
}

TEST_CASE("flat signal has no peaks and signals fallback") {
  EcgRecord r = pulse_record(100.0, 5.0, {});
  const BeatDetection d = detect_beats(r);
  CHECK(d.peaks.empty());
  CHECK(d.fallback_needed());
}

TEST_CASE("two pulses 50 ms apart keep only the larger") {
  for (bool larger_first : {true, false}) {
    const double a = larger_first ? 1.0 : 0.5;
    const double b = larger_first ? 0.5 : 1.0;
    const EcgRecord r = pulse_record(500.0, 3.0, {{1.0, a}, {1.05, b}});
    const BeatDetection d = detect_beats(r);
    REQUIRE(d.peaks.size() == 1);
    const double truth = larger_first ? 500.0 : 525.0;
    CHECK(std::abs(static_cast<double>(d.peaks[0]) - truth) <= 3.0);
  }
}

TEST_CASE("detected peaks are increasing and respect the refractory period") {
  data::SynthConfig cfg;
  cfg.n_records = 30;
  cfg.seed = 9;
  const auto synth = data::synth_dataset(cfg);
  for (const EcgRecord& r : synth.dataset.records) {
    const BeatDetection d = detect_beats(zscore(r));
    for (std::size_t i = 1; i < d.peaks.size(); ++i) CHECK(d.peaks[i] >= d.peaks[i - 1] + 20);
  }
}

TEST_CASE("detector recall and precision on synthetic records") {
  data::SynthConfig cfg;
  cfg.n_records = 200;
  cfg.seed = 2024;
  const auto synth = data::synth_dataset(cfg);
  std::size_t truth_total = 0, found_total = 0, matched = 0;
  for (std::size_t r = 0; r < synth.dataset.size(); ++r) {
    const EcgRecord& rec = synth.dataset.records[r];
    const auto tol = static_cast<std::ptrdiff_t>(std::lround(0.05 * rec.sample_rate));
    const auto& truth = synth.peaks[r];
    const auto found = detect_beats(zscore(rec)).peaks;
    truth_total += truth.size();
    found_total += found.size();
    // Both lists are sorted, so a two-pointer sweep gives a one-to-one matching.
    std::size_t i = 0, j = 0;
    while (i < truth.size() && j < found.size()) {
      const auto diff = static_cast<std::ptrdiff_t>(found[j]) - static_cast<std::ptrdiff_t>(truth[i]);
      if (std::abs(diff) <= tol) {
        ++matched, ++i, ++j;
      } else if (diff < 0) {
        ++j;
      } else {
        ++i;
      }
    }
  }
  const double recall = static_cast<double>(matched) / static_cast<double>(truth_total);
  const double precision = static_cast<double>(matched) / static_cast<double>(found_total);
  MESSAGE("recall " << recall << " precision " << precision);
  CHECK(recall >= 0.95);
  CHECK(precision >= 0.95);
}

TEST_CASE("segment bookkeeping") {
  EcgRecord r = pulse_record(100.0, 7.0, {});
  r.label = 2;
  const std::vector<std::size_t> peaks{100, 350, 600};
  const SnippetSeries s = segment(r, peaks, 243);
  REQUIRE(s.size() == 2);
  CHECK(s.snippets[0].start == 100);
  CHECK(s.snippets[0].end == 350);
  CHECK(s.snippets[1].start == 350);
  CHECK(s.snippets[1].end == 600);
  CHECK(s.label == 2);

  std::vector<std::size_t> eleven;
  for (std::size_t i = 0; i < 11; ++i) eleven.push_back(10 + 60 * i);
  CHECK(segment(r, eleven, 243).size() == 10);

  const std::vector<std::size_t> one{100};
  CHECK_THROWS_AS(segment(r, one, 243), UsageError);
}

TEST_CASE("resample identity, ramp and constant") {
  Rng rng(4);
  std::vector<double> seg(2 * 243);
  for (double& v : seg) v = rng.uniform(-3, 3);
  const auto same = resample_segment(seg, 2, 243);
  for (std::size_t i = 0; i < seg.size(); ++i) CHECK(std::abs(same[i] - seg[i]) <= 1e-12);

  for (std::size_t n : {2, 3, 17, 100, 500}) {
    std::vector<double> ramp(n);
    for (std::size_t i = 0; i < n; ++i) ramp[i] = static_cast<double>(i) / static_cast<double>(n - 1);
    const auto out = resample_segment(ramp, 1, 243);
    for (std::size_t j = 0; j < 243; ++j) CHECK(std::abs(out[j] - static_cast<double>(j) / 242.0) <= 1e-12);
    CHECK(out.front() == 0.0);
    CHECK(out.back() == 1.0);
  }
  const std::vector<double> flat(37, 2.5);
  for (double v : resample_segment(flat, 1, 243)) CHECK(v == 2.5);

  const std::vector<double> single{1.0};
  CHECK_THROWS_AS(resample_segment(single, 1, 243), UsageError);
}

TEST_CASE("fixed-window fallback") {
  const EcgRecord ten = pulse_record(100.0, 10.0, {});
  const SnippetSeries s = fallback_fixed_windows(ten, 0.8, 243);
  CHECK(s.size() == 12);
  CHECK(s.from_fallback);
  for (const Snippet& snip : s.snippets)
    for (double v : snip.values) CHECK(v == 0.0);
  check_series(s, ten, 243);

  const EcgRecord short_one = pulse_record(100.0, 0.5, {});
  CHECK_THROWS_AS(fallback_fixed_windows(short_one, 0.8, 243), ValidationError);
}

TEST_CASE("make_snippets falls back on a flat record") {
  const EcgRecord flat = pulse_record(100.0, 4.0, {}, 2);
  const SnippetSeries s = make_snippets(flat);
  CHECK(s.from_fallback);
  CHECK(s.size() == 5);
}

TEST_CASE("both snippet paths satisfy the series invariants and inherit labels") {
  data::SynthConfig cfg;
  cfg.n_records = 100;
  cfg.seed = 77;
  cfg.max_seconds = 20.0;
  const auto synth = data::synth_dataset(cfg);
  for (const EcgRecord& r : synth.dataset.records) {
    const SnippetSeries beats = make_snippets(r);
    CHECK_FALSE(beats.from_fallback);
    check_series(beats, r, 243);
    check_series(fallback_fixed_windows(zscore(r), 0.8, 243), r, 243);
  }
}

TEST_CASE("zscore standardizes every channel") {
  data::SynthConfig cfg;
  cfg.n_records = 1;
  const EcgRecord z = zscore(data::synth_dataset(cfg).dataset.records[0]);
  for (std::size_t c = 0; c < z.channels; ++c) {
    double mean = 0, sq = 0;
    for (double v : z.channel(c)) mean += v, sq += v * v;
    const double n = static_cast<double>(z.length());
    CHECK(std::abs(mean / n) < 1e-10);
    CHECK(std::abs(sq / n - 1.0) < 1e-10);
  }
}
