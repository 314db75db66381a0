#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace conprom {

// Flat `key = value` configuration. Lines starting with '#' (or inline '#'
// outside quotes) are comments; values may be double-quoted.
class Config {
 public:
  Config() = default;

  static Config parse(const std::string& text);
  static Config from_file(const std::string& path);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  void set(const std::string& key, const std::string& value);
  void set_double(const std::string& key, double value);
  void set_int(const std::string& key, std::int64_t value);
  void set_uint(const std::string& key, std::uint64_t value);
  void set_bool(const std::string& key, bool value);

  const std::map<std::string, std::string>& entries() const { return values_; }
  std::string serialize() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace conprom
