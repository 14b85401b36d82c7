// SPDX-License-Identifier: Apache-2.0
#include "spn/data/dataset.hpp"

#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "spn/util/errors.hpp"

namespace spn::data {

namespace fs = std::filesystem;
using signal::EcgRecord;

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(records.size());
  for (const EcgRecord& r : records) out.push_back(r.label);
  return out;
}

void Dataset::validate() const {
  if (num_classes() < 2) throw ValidationError("dataset: need at least 2 classes");
  for (const EcgRecord& r : records) {
    r.validate(num_classes());
    if (r.channels != records.front().channels) {
      throw ValidationError("dataset: record '" + r.record_id + "' has a different channel count");
    }
    if (r.sample_rate != sample_rate) {
      throw ValidationError("dataset: record '" + r.record_id + "' has a different sample rate");
    }
  }
}

namespace {

[[noreturn]] void parse_fail(const fs::path& path, std::size_t line, const std::string& what) {
  throw ParseError(path.string() + ":" + std::to_string(line) + ": " + what);
}

void parse_header(const fs::path& path, const std::string& line, EcgRecord& record) {
  if (line.rfind('#', 0) != 0) parse_fail(path, 1, "expected header '# rate=<Hz> label=<id> id=<text>'");
  const auto rate_at = line.find("rate=");
  const auto label_at = line.find("label=");
  const auto id_at = line.find("id=", label_at == std::string::npos ? 0 : label_at + 6);
  if (rate_at == std::string::npos || label_at == std::string::npos || id_at == std::string::npos) {
    parse_fail(path, 1, "header must contain rate=, label= and id=");
  }
  auto number = [&](std::size_t at, auto& value) {
    const char* begin = line.data() + at;
    const char* end = line.data() + line.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || (ptr != end && *ptr != ' ')) parse_fail(path, 1, "malformed header value");
  };
  number(rate_at + 5, record.sample_rate);
  number(label_at + 6, record.label);
  record.record_id = line.substr(id_at + 3);
  while (!record.record_id.empty() && (record.record_id.back() == '\r' || record.record_id.back() == ' ')) {
    record.record_id.pop_back();
  }
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

EcgRecord load_record(const fs::path& path, std::optional<std::size_t> num_classes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read record " + path.string());
  std::string line;
  if (!std::getline(in, line)) parse_fail(path, 1, "empty file");
  EcgRecord record;
  parse_header(path, line, record);

  std::vector<std::vector<double>> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (in.peek() == std::char_traits<char>::eof()) break;
      parse_fail(path, number, "empty row");
    }
    std::vector<double> row;
    const char* p = line.data();
    const char* end = p + line.size();
    while (true) {
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc{} || next == p) parse_fail(path, number, "non-numeric cell");
      row.push_back(v);
      if (next == end) break;
      if (*next != ',') parse_fail(path, number, "non-numeric cell");
      p = next + 1;
      if (p == end) parse_fail(path, number, "missing cell after trailing comma");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      parse_fail(path, number,
                 "ragged row: expected " + std::to_string(rows.front().size()) + " cells, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) parse_fail(path, number, "no samples");

  record.channels = rows.front().size();
  const std::size_t n = rows.size();
  record.samples.resize(record.channels * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < record.channels; ++c) record.samples[c * n + i] = rows[i][c];

  // Only the label bound is enforced here; a short record is a valid file.
  if (num_classes && (record.label < 0 || static_cast<std::size_t>(record.label) >= *num_classes)) {
    throw ValidationError(path.string() + ": label " + std::to_string(record.label) + " is not below class count " +
                          std::to_string(*num_classes));
  }
  return record;
}

void write_record(const fs::path& path, const EcgRecord& record) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write record " + path.string());
  out << "# rate=" << format_double(record.sample_rate) << " label=" << record.label << " id=" << record.record_id
      << '\n';
  const std::size_t n = record.length();
  std::string line;
  for (std::size_t i = 0; i < n; ++i) {
    line.clear();
    for (std::size_t c = 0; c < record.channels; ++c) {
      if (c) line.push_back(',');
      line += format_double(record.samples[c * n + i]);
    }
    line.push_back('\n');
    out << line;
  }
  if (!out) throw IoError("failed writing record " + path.string());
}

Dataset load_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot read manifest " + manifest_path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  Dataset dataset;
  try {
    if (doc.at("format") != "spn-dataset") throw ParseError(manifest_path.string() + ": not an spn-dataset manifest");
    dataset.sample_rate = doc.at("sample_rate").get<double>();
    dataset.class_names = doc.at("class_names").get<std::vector<std::string>>();
    const fs::path base = manifest_path.parent_path();
    for (const auto& entry : doc.at("records")) {
      EcgRecord r = load_record(base / entry.at("path").get<std::string>(), dataset.num_classes());
      if (r.label != entry.at("label").get<int>()) {
        throw ValidationError(manifest_path.string() + ": label of '" + r.record_id + "' disagrees with its file");
      }
      dataset.records.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  dataset.validate();
  return dataset;
}

fs::path write_dataset(const fs::path& dir, const Dataset& dataset) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  nlohmann::json records = nlohmann::json::array();
  for (const EcgRecord& r : dataset.records) {
    const std::string name = r.record_id + ".csv";
    write_record(dir / name, r);
    records.push_back({{"path", name}, {"label", r.label}, {"id", r.record_id}});
  }
  nlohmann::json doc = {{"format", "spn-dataset"},
                        {"version", 1},
                        {"sample_rate", dataset.sample_rate},
                        {"class_names", dataset.class_names},
                        {"records", records}};
  const fs::path manifest = dir / "manifest.json";
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + manifest.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("failed writing manifest " + manifest.string());
  return manifest;
}

}  // namespace spn::data
