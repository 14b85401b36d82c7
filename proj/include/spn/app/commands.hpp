// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include "spn/model/agent.hpp"

namespace spn::app {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitNumeric = 2,
  kExitIo = 3,
};

struct CommandOptions {
  std::optional<std::filesystem::path> config;
  std::filesystem::path out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<model::ActionMode> mode;
  std::optional<model::RewardVariant> reward;
  std::optional<double> fraction;
  std::optional<std::filesystem::path> checkpoint;  // eval
  std::optional<std::filesystem::path> data;        // eval: dataset manifest override
  std::string corrupt_op;                           // gradcheck
  std::size_t workers = 1;
};

/// Each command writes run_manifest.json into `out` before doing real work
/// and throws on failure; run_guarded maps exceptions to exit codes.
void cmd_synth(const CommandOptions& options, std::ostream& log);
void cmd_train(const CommandOptions& options, std::ostream& log);
void cmd_eval(const CommandOptions& options, std::ostream& log);
/// Returns false when any check fails.
bool cmd_gradcheck(const CommandOptions& options, std::ostream& log);
void cmd_crossval(const CommandOptions& options, std::ostream& log);

/// Runs `body`, printing any error to `err`: usage, parse, validation and
/// shape errors give 1, numeric errors 2, I/O errors 3.
int run_guarded(const std::function<int()>& body, std::ostream& err);

}  // namespace spn::app
