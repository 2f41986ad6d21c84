#include "rnf/config.h"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <sstream>

#include "rnf/data.h"
#include "rnf/errors.h"

namespace rnf {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) out.push_back(trim(item));
  return out;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& origin) {
  KeyValueConfig config;
  config.origin_ = origin;
  std::istringstream in(text);
  std::size_t line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + " line " + std::to_string(line_no) +
                        ": expected key=value, got '" + line + "'");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw ConfigError(origin + " line " + std::to_string(line_no) + ": empty key");
    }
    if (config.has(key)) {
      throw ConfigError(origin + " line " + std::to_string(line_no) + ": key '" + key +
                        "' given twice");
    }
    config.values_[key] = trim(line.substr(eq + 1));
  }
  return config;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  return parse(read_file(path), path.string());
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

std::optional<std::string> KeyValueConfig::find(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) const {
  return find(key).value_or(fallback);
}

std::string KeyValueConfig::require_string(const std::string& key) const {
  auto v = find(key);
  if (!v || v->empty()) throw ConfigError(origin_ + ": missing required key '" + key + "'");
  return *v;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto v = find(key);
  if (!v) return fallback;
  errno = 0;
  char* end = nullptr;
  const auto parsed = std::strtoull(v->c_str(), &end, 10);
  if (v->empty() || *end != '\0' || errno != 0 || (*v)[0] == '-') {
    throw ConfigError(origin_ + ": '" + key + "' must be a non-negative integer, got '" + *v +
                      "'");
  }
  return parsed;
}

std::size_t KeyValueConfig::get_size(const std::string& key, std::size_t fallback) const {
  return static_cast<std::size_t>(get_u64(key, fallback));
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto v = find(key);
  if (!v) return fallback;
  errno = 0;
  char* end = nullptr;
  const double parsed = std::strtod(v->c_str(), &end);
  if (v->empty() || *end != '\0' || errno != 0) {
    throw ConfigError(origin_ + ": '" + key + "' must be a number, got '" + *v + "'");
  }
  return parsed;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto v = find(key);
  if (!v) return fallback;
  if (*v == "1" || *v == "true" || *v == "yes") return true;
  if (*v == "0" || *v == "false" || *v == "no") return false;
  throw ConfigError(origin_ + ": '" + key + "' must be true/false, got '" + *v + "'");
}

std::vector<std::size_t> KeyValueConfig::get_size_list(const std::string& key,
                                                       std::vector<std::size_t> fallback) const {
  auto v = find(key);
  if (!v) return fallback;
  std::vector<std::size_t> out;
  for (const auto& item : split_commas(*v)) {
    KeyValueConfig one;
    one.origin_ = origin_;
    one.values_[key] = item;
    const auto n = one.get_size(key, 0);
    if (n == 0) throw ConfigError(origin_ + ": '" + key + "' entries must be positive");
    out.push_back(n);
  }
  if (out.empty()) throw ConfigError(origin_ + ": '" + key + "' is an empty list");
  return out;
}

std::vector<double> KeyValueConfig::get_double_list(const std::string& key,
                                                    std::vector<double> fallback) const {
  auto v = find(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& item : split_commas(*v)) {
    KeyValueConfig one;
    one.origin_ = origin_;
    one.values_[key] = item;
    out.push_back(one.get_double(key, 0.0));
  }
  if (out.empty()) throw ConfigError(origin_ + ": '" + key + "' is an empty list");
  return out;
}

void KeyValueConfig::reject_unknown(std::span<const std::string> known) const {
  for (const auto& [key, value] : values_) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(origin_ + ": unknown key '" + key + "'");
    }
  }
}

}  // namespace rnf
