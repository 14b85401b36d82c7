// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace spn::app {

inline constexpr const char* kManifestFile = "run_manifest.json";

struct Artifact {
  std::string name;  // relative to the output directory
  std::string sha256;
  bool operator==(const Artifact&) const = default;
};

/// Provenance of one command run. Written with status "running" before any
/// long computation and rewritten with checksums when the command finishes.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::string config_sha256;  // empty without a config file
  std::uint64_t seed = 0;
  std::string output_dir;
  std::map<std::string, std::string> options;  // command-line overrides
  std::string status = "running";             // running | complete | failed
  std::string error;
  std::vector<Artifact> artifacts;

  bool operator==(const RunManifest&) const = default;
};

std::string serialize(const RunManifest& manifest);
RunManifest parse_manifest(const std::string& text);

void write_manifest(const std::filesystem::path& out_dir, const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& path);

/// Appends (name, sha256 of out_dir/name) to the manifest.
void record_artifact(RunManifest& manifest, const std::filesystem::path& out_dir, const std::string& name);

}  // namespace spn::app
