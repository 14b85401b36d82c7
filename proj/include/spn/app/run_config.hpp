// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spn/data/synth.hpp"
#include "spn/model/agent.hpp"
#include "spn/signal/record.hpp"
#include "spn/signal/snippets.hpp"
#include "spn/train/train.hpp"

namespace spn::app {

struct DataConfig {
  std::filesystem::path manifest;       // training data; empty when unused
  std::filesystem::path test_manifest;  // optional held-out data for eval
  double validation_fraction = 0.2;     // stratified share of `manifest` kept for validation
  signal::SnippetOptions snippets;      // width always follows model.snippet_width
};

/// Everything one command needs, resolved from a key/value config file.
/// Relative data paths are resolved against the config file's directory.
struct RunConfig {
  std::filesystem::path source;  // config file, empty for defaults
  std::uint64_t seed = 1;
  train::TrainConfig train;
  data::SynthConfig synth;
  DataConfig data;
  model::ActionMode eval_mode = model::ActionMode::thresholded;

  /// Propagates the top-level seed to the training and synthesis configs.
  void set_seed(std::uint64_t value);
  void validate() const;
};

RunConfig parse_run_config(const std::string& text, const std::string& origin,
                           const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Every key with its effective value, in the same syntax the parser reads.
std::string to_config_text(const RunConfig& config);

data::OnsetPolicy parse_onset(const std::string& text);
const char* to_string(data::OnsetPolicy policy);

struct PreparedData {
  std::vector<signal::SnippetSeries> train;
  std::vector<signal::SnippetSeries> validation;
  std::vector<std::string> class_names;
};

/// Snippet series for every record of `manifest`. Throws ValidationError when
/// the dataset's class count or channel count disagrees with the model.
std::vector<signal::SnippetSeries> load_series(const std::filesystem::path& manifest, const RunConfig& config,
                                               std::vector<std::string>* class_names = nullptr);

/// Loads data.manifest and splits it per class with the (seed, "split") stream.
PreparedData prepare_training_data(const RunConfig& config);

}  // namespace spn::app
