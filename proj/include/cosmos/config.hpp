#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace cosmos {

inline constexpr const char* kVersion = "1.0.0";

// Nested key/value text file: [section] headers, key = value lines, '#'
// comments. Values are kept as strings; typed getters parse on demand.
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, const std::string& value);

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  int get_int(const std::string& section, const std::string& key, int fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) const;

  // "section.key=value" override, e.g. from a CLI flag.
  void apply_override(const std::string& assignment);

  std::string serialize() const;  // stable section/key order

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace cosmos
