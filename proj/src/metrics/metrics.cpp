// SPDX-License-Identifier: Apache-2.0
#include "spn/metrics/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>

#include "spn/util/errors.hpp"

namespace spn::metrics {

namespace {

void require_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw UsageError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
  if (a == 0) throw UsageError(std::string(what) + ": empty input");
}

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

double accuracy(std::span<const int> labels, std::span<const int> predictions) {
  require_aligned(labels.size(), predictions.size(), "accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += labels[i] == predictions[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double earliness(std::span<const std::size_t> prediction_points, std::span<const std::size_t> lengths) {
  require_aligned(prediction_points.size(), lengths.size(), "earliness");
  double total = 0.0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (prediction_points[i] == 0 || prediction_points[i] > lengths[i]) {
      throw ValidationError("earliness: prediction point " + std::to_string(prediction_points[i]) +
                            " outside (0, " + std::to_string(lengths[i]) + "] at index " + std::to_string(i));
    }
    total += static_cast<double>(prediction_points[i]) / static_cast<double>(lengths[i]);
  }
  return total / static_cast<double>(lengths.size());
}

double harmonic_mean(double accuracy, double earliness) {
  const double timely = 1.0 - earliness;
  const double den = timely + accuracy;
  return den == 0.0 ? 0.0 : 2.0 * timely * accuracy / den;
}

Confusion confusion_matrix(std::span<const int> labels, std::span<const int> predictions, std::size_t num_classes) {
  require_aligned(labels.size(), predictions.size(), "confusion_matrix");
  Confusion c(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i], p = predictions[i];
    if (y < 0 || p < 0 || static_cast<std::size_t>(y) >= num_classes || static_cast<std::size_t>(p) >= num_classes) {
      throw ValidationError("confusion_matrix: class id out of range at index " + std::to_string(i));
    }
    ++c[static_cast<std::size_t>(y)][static_cast<std::size_t>(p)];
  }
  return c;
}

ClassScores macro_prf(const Confusion& confusion) {
  const std::size_t k = confusion.size();
  if (k < 2) throw UsageError("macro_prf: need at least 2 classes");
  ClassScores s;
  for (std::size_t c = 0; c < k; ++c) {
    if (confusion[c].size() != k) throw ShapeError("macro_prf: confusion matrix is not square");
    double tp = static_cast<double>(confusion[c][c]);
    double predicted = 0.0, actual = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      predicted += static_cast<double>(confusion[j][c]);
      actual += static_cast<double>(confusion[c][j]);
    }
    const double p = ratio(tp, predicted);
    const double r = ratio(tp, actual);
    s.precision.push_back(p);
    s.recall.push_back(r);
    s.f1.push_back(ratio(2.0 * p * r, p + r));
  }
  for (std::size_t c = 0; c < k; ++c) {
    s.macro_precision += s.precision[c];
    s.macro_recall += s.recall[c];
    s.macro_f1 += s.f1[c];
  }
  s.macro_precision /= static_cast<double>(k);
  s.macro_recall /= static_cast<double>(k);
  s.macro_f1 /= static_cast<double>(k);
  return s;
}

void EvalReport::validate() const {
  if (confusion.size() != num_classes) throw ValidationError("report: confusion matrix has wrong size");
  std::size_t total = 0, diag = 0;
  for (std::size_t r = 0; r < num_classes; ++r) {
    if (confusion[r].size() != num_classes) throw ValidationError("report: confusion matrix is not square");
    for (std::size_t c = 0; c < num_classes; ++c) total += confusion[r][c];
    diag += confusion[r][r];
  }
  if (total != m) throw ValidationError("report: confusion total " + std::to_string(total) + " != m " + std::to_string(m));
  if (m == 0 || accuracy != static_cast<double>(diag) / static_cast<double>(m)) {
    throw ValidationError("report: accuracy disagrees with the confusion matrix");
  }
  auto rate = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(std::string("report: ") + name + " outside [0, 1]");
  };
  rate(accuracy, "accuracy");
  rate(earliness, "earliness");
  rate(harmonic_mean, "harmonic_mean");
  rate(scores.macro_precision, "macro_precision");
  rate(scores.macro_recall, "macro_recall");
  rate(scores.macro_f1, "macro_f1");
  for (std::size_t c = 0; c < scores.f1.size(); ++c) {
    rate(scores.precision[c], "precision");
    rate(scores.recall[c], "recall");
    rate(scores.f1[c], "f1");
  }
}

EvalReport build_report(std::span<const int> labels, std::span<const int> predictions,
                        std::span<const std::size_t> prediction_points, std::span<const std::size_t> lengths,
                        std::size_t num_classes) {
  require_aligned(labels.size(), predictions.size(), "build_report");
  require_aligned(labels.size(), prediction_points.size(), "build_report");
  require_aligned(labels.size(), lengths.size(), "build_report");
  EvalReport r;
  r.num_classes = num_classes;
  r.m = labels.size();
  r.confusion = confusion_matrix(labels, predictions, num_classes);
  r.accuracy = accuracy(labels, predictions);
  r.earliness = earliness(prediction_points, lengths);
  r.harmonic_mean = harmonic_mean(r.accuracy, r.earliness);
  r.scores = macro_prf(r.confusion);
  return r;
}

std::string serialize(const EvalReport& report) {
  nlohmann::json doc = {
      {"num_classes", report.num_classes},
      {"m", report.m},
      {"accuracy", report.accuracy},
      {"earliness", report.earliness},
      {"harmonic_mean", report.harmonic_mean},
      {"macro_precision", report.scores.macro_precision},
      {"macro_recall", report.scores.macro_recall},
      {"macro_f1", report.scores.macro_f1},
      {"per_class", {{"precision", report.scores.precision}, {"recall", report.scores.recall}, {"f1", report.scores.f1}}},
      {"confusion", report.confusion},
  };
  return doc.dump(2) + "\n";
}

EvalReport parse_report(const std::string& text) {
  try {
    const nlohmann::json doc = nlohmann::json::parse(text);
    EvalReport r;
    r.num_classes = doc.at("num_classes").get<std::size_t>();
    r.m = doc.at("m").get<std::size_t>();
    r.accuracy = doc.at("accuracy").get<double>();
    r.earliness = doc.at("earliness").get<double>();
    r.harmonic_mean = doc.at("harmonic_mean").get<double>();
    r.scores.macro_precision = doc.at("macro_precision").get<double>();
    r.scores.macro_recall = doc.at("macro_recall").get<double>();
    r.scores.macro_f1 = doc.at("macro_f1").get<double>();
    const auto& per = doc.at("per_class");
    r.scores.precision = per.at("precision").get<std::vector<double>>();
    r.scores.recall = per.at("recall").get<std::vector<double>>();
    r.scores.f1 = per.at("f1").get<std::vector<double>>();
    r.confusion = doc.at("confusion").get<Confusion>();
    r.validate();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
}

std::vector<double> summary_row(const EvalReport& r) {
  return {r.accuracy, r.earliness, r.harmonic_mean, r.scores.macro_precision, r.scores.macro_recall, r.scores.macro_f1};
}

const std::vector<std::string>& summary_names() {
  static const std::vector<std::string> names{"accuracy", "earliness", "harmonic_mean", "precision", "recall", "f1"};
  return names;
}

Aggregate aggregate(std::span<const EvalReport> reports) {
  if (reports.empty()) throw UsageError("aggregate: no reports");
  Aggregate a{std::vector<double>(kSummaryColumns, 0.0), std::vector<double>(kSummaryColumns, 0.0)};
  const auto n = static_cast<double>(reports.size());
  for (const EvalReport& r : reports) {
    const auto row = summary_row(r);
    for (std::size_t j = 0; j < kSummaryColumns; ++j) a.mean[j] += row[j];
  }
  for (double& v : a.mean) v /= n;
  if (reports.size() > 1) {
    for (const EvalReport& r : reports) {
      const auto row = summary_row(r);
      for (std::size_t j = 0; j < kSummaryColumns; ++j) a.std[j] += (row[j] - a.mean[j]) * (row[j] - a.mean[j]);
    }
    for (double& v : a.std) v = std::sqrt(v / (n - 1.0));
  }
  return a;
}

std::string format_table(std::span<const EvalReport> reports) {
  std::string out = "fold";
  for (const auto& name : summary_names()) out += "," + name;
  out += "\n";
  char buf[64];
  auto row = [&](const std::string& head, const std::vector<double>& values) {
    out += head;
    for (double v : values) {
      std::snprintf(buf, sizeof(buf), ",%.6f", v);
      out += buf;
    }
    out += "\n";
  };
  for (std::size_t i = 0; i < reports.size(); ++i) row(std::to_string(i), summary_row(reports[i]));
  const Aggregate a = aggregate(reports);
  row("mean", a.mean);
  row("std", a.std);
  return out;
}

}  // namespace spn::metrics
