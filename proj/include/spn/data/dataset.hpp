// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spn/signal/record.hpp"

namespace spn::data {

struct Dataset {
  std::vector<signal::EcgRecord> records;
  std::vector<std::string> class_names;
  double sample_rate = 0.0;

  std::size_t num_classes() const { return class_names.size(); }
  std::size_t size() const { return records.size(); }
  std::vector<int> labels() const;
  /// Record invariants plus a shared channel count and sample rate.
  void validate() const;
};

// Record file format (plain text):
//   line 1:  # rate=<Hz> label=<class id> id=<record id>
//   then one line per sample, M comma-separated values (one per channel).
// Values are written in shortest round-trip form, so write/load is exact.

signal::EcgRecord load_record(const std::filesystem::path& path,
                              std::optional<std::size_t> num_classes = std::nullopt);
void write_record(const std::filesystem::path& path, const signal::EcgRecord& record);

// Manifest (JSON): {"format": "spn-dataset", "version": 1, "sample_rate": <Hz>,
//   "class_names": [...], "records": [{"path": <relative to manifest>, "label": <id>, "id": <text>}, ...]}

Dataset load_manifest(const std::filesystem::path& manifest_path);
/// Writes one CSV per record into `dir` plus `dir/manifest.json`; returns the
/// manifest path.
std::filesystem::path write_dataset(const std::filesystem::path& dir, const Dataset& dataset);

}  // namespace spn::data
