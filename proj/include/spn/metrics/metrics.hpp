// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace spn::metrics {

/// Fraction of positions where labels and predictions agree. Throws
/// UsageError on empty or mismatched input.
double accuracy(std::span<const int> labels, std::span<const int> predictions);

/// Mean of s_i / L_i. Throws ValidationError unless 0 < s_i <= L_i.
double earliness(std::span<const std::size_t> prediction_points, std::span<const std::size_t> lengths);

/// 2 (1 - E) A / ((1 - E) + A), and 0 when both terms are 0.
double harmonic_mean(double accuracy, double earliness);

/// K x K counts, rows are truth and columns are predictions.
using Confusion = std::vector<std::vector<std::size_t>>;

Confusion confusion_matrix(std::span<const int> labels, std::span<const int> predictions, std::size_t num_classes);

struct ClassScores {
  std::vector<double> precision, recall, f1;
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  bool operator==(const ClassScores&) const = default;
};

/// Per-class and macro-averaged precision, recall and F1. A ratio with a zero
/// denominator is 0, and that 0 enters the macro mean.
ClassScores macro_prf(const Confusion& confusion);

struct EvalReport {
  std::size_t num_classes = 0;
  std::size_t m = 0;
  Confusion confusion;
  double accuracy = 0.0;
  double earliness = 0.0;
  double harmonic_mean = 0.0;
  ClassScores scores;

  /// Throws ValidationError if counts or rates are inconsistent.
  void validate() const;
  bool operator==(const EvalReport&) const = default;
};

/// Assembles a report from aligned per-sample predictions, prediction points
/// and series lengths.
EvalReport build_report(std::span<const int> labels, std::span<const int> predictions,
                        std::span<const std::size_t> prediction_points, std::span<const std::size_t> lengths,
                        std::size_t num_classes);

/// JSON text with fixed field names; doubles are written in shortest
/// round-trip form so parse(serialize(r)) == r.
std::string serialize(const EvalReport& report);
EvalReport parse_report(const std::string& text);

/// The six headline columns: accuracy, earliness, HM, macro P, R, F1.
inline constexpr std::size_t kSummaryColumns = 6;
std::vector<double> summary_row(const EvalReport& report);
const std::vector<std::string>& summary_names();

struct Aggregate {
  std::vector<double> mean;  // per summary column
  std::vector<double> std;   // sample standard deviation, 0 for one report
};

Aggregate aggregate(std::span<const EvalReport> reports);

/// Comma-separated table: one row per report then "mean" and "std" rows.
std::string format_table(std::span<const EvalReport> reports);

}  // namespace spn::metrics
