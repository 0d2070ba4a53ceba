#include "cosmos/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cosmos {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path);
}

Config Config::parse_string(const std::string& text, const std::string& origin) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty())
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": empty key");
    cfg.sections_[section][key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

bool Config::has(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  sections_[section][key] = value;
}

std::string Config::get_string(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return fallback;
  auto k = s->second.find(key);
  return k == s->second.end() ? fallback : k->second;
}

int Config::get_int(const std::string& section, const std::string& key, int fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get_string(section, key, "");
  try {
    std::size_t pos = 0;
    int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw std::runtime_error("config: " + section + "." + key + " is not an integer: '" + v + "'");
  }
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get_string(section, key, "");
  try {
    std::size_t pos = 0;
    double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw std::runtime_error("config: " + section + "." + key + " is not a number: '" + v + "'");
  }
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get_string(section, key, "");
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::runtime_error("config: " + section + "." + key + " is not a boolean: '" + v + "'");
}

std::uint64_t Config::get_u64(const std::string& section, const std::string& key,
                              std::uint64_t fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get_string(section, key, "");
  try {
    std::size_t pos = 0;
    std::uint64_t out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw std::runtime_error("config: " + section + "." + key + " is not an unsigned integer: '" +
                             v + "'");
  }
}

void Config::apply_override(const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::runtime_error("override must look like section.key=value: '" + assignment + "'");
  const std::string path = trim(assignment.substr(0, eq));
  const std::size_t dot = path.find('.');
  if (dot == std::string::npos)
    throw std::runtime_error("override key must be section.key: '" + assignment + "'");
  set(path.substr(0, dot), path.substr(dot + 1), trim(assignment.substr(eq + 1)));
}

std::string Config::serialize() const {
  std::ostringstream out;
  bool first = true;
  for (const auto& [section, entries] : sections_) {
    if (!first) out << '\n';
    first = false;
    out << '[' << section << "]\n";
    for (const auto& [key, value] : entries) out << key << " = " << value << '\n';
  }
  return out.str();
}

}  // namespace cosmos
