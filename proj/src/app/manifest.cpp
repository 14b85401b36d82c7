// SPDX-License-Identifier: Apache-2.0
#include "spn/app/manifest.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spn/util/checksum.hpp"
#include "spn/util/errors.hpp"

namespace spn::app {

using nlohmann::json;

std::string serialize(const RunManifest& m) {
  json artifacts = json::array();
  for (const Artifact& a : m.artifacts) artifacts.push_back({{"name", a.name}, {"sha256", a.sha256}});
  json j = {{"format", "spn-run"},
            {"version", 1},
            {"command", m.command},
            {"config_path", m.config_path},
            {"config_sha256", m.config_sha256},
            {"seed", m.seed},
            {"output_dir", m.output_dir},
            {"options", m.options},
            {"status", m.status},
            {"error", m.error},
            {"artifacts", artifacts}};
  return j.dump(2) + "\n";
}

RunManifest parse_manifest(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "spn-run" || j.at("version") != 1) throw ParseError("run manifest: unknown format or version");
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.config_path = j.at("config_path").get<std::string>();
    m.config_sha256 = j.at("config_sha256").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.output_dir = j.at("output_dir").get<std::string>();
    m.options = j.at("options").get<std::map<std::string, std::string>>();
    m.status = j.at("status").get<std::string>();
    m.error = j.at("error").get<std::string>();
    for (const json& a : j.at("artifacts")) {
      m.artifacts.push_back({a.at("name").get<std::string>(), a.at("sha256").get<std::string>()});
    }
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("run manifest: ") + e.what());
  }
}

void write_manifest(const std::filesystem::path& out_dir, const RunManifest& manifest) {
  const std::filesystem::path path = out_dir / kManifestFile;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << serialize(manifest);
  if (!out) throw IoError("write failed: " + path.string());
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_manifest(text.str());
}

void record_artifact(RunManifest& manifest, const std::filesystem::path& out_dir, const std::string& name) {
  manifest.artifacts.push_back({name, file_sha256(out_dir / name)});
}

}  // namespace spn::app
