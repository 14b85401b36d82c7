// SPDX-License-Identifier: Apache-2.0
#include "spn/util/kv_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "spn/util/errors.hpp"

namespace spn {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& origin) {
  KeyValueConfig cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ParseError(origin + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = trim(body.substr(0, eq));
    if (key.empty()) throw ParseError(origin + ":" + std::to_string(number) + ": empty key");
    if (cfg.values_.count(key)) {
      throw ParseError(origin + ":" + std::to_string(number) + ": duplicate key '" + key + "'");
    }
    cfg.values_[key] = trim(body.substr(eq + 1));
    cfg.lines_[key] = number;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str(), path.string());
}

void KeyValueConfig::bad_value(const std::string& key, const char* expected) const {
  std::string where = origin_;
  if (auto it = lines_.find(key); it != lines_.end()) where += ":" + std::to_string(it->second);
  throw ValidationError(where + ": key '" + key + "' expects " + expected + ", got '" + values_.at(key) + "'");
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& s = it->second;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) bad_value(key, "a number");
  return v;
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& s = it->second;
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) bad_value(key, "an integer");
  return v;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& s = it->second;
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) bad_value(key, "an unsigned integer");
  return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  bad_value(key, "true or false");
}

std::vector<std::size_t> KeyValueConfig::get_sizes(const std::string& key, std::vector<std::size_t> fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<std::size_t> out;
  std::istringstream in(it->second);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc{} || ptr != item.data() + item.size()) {
      bad_value(key, "a comma-separated list of integers");
    }
    out.push_back(v);
  }
  if (out.empty()) bad_value(key, "a non-empty list");
  return out;
}

void KeyValueConfig::reject_unknown(const std::set<std::string>& known) const {
  for (const auto& [key, value] : values_) {
    if (!known.count(key)) {
      auto line = lines_.find(key);
      const std::string where = line == lines_.end() ? origin_ : origin_ + ":" + std::to_string(line->second);
      throw ValidationError(where + ": unknown key '" + key + "'");
    }
  }
}

}  // namespace spn
