#pragma once
// Flat key = value run configuration: one file, '#' comments, string/number/
// bool values. Every run logs the resolved config and its FNV-1a hash.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace plm {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Config {
 public:
  static Config parse(std::string_view text);
  static Config parse_file(const std::string& path);

  bool has(std::string_view key) const;
  void set(std::string_view key, std::string_view value);  // override wins

  std::string get_str(std::string_view key, std::string_view fallback) const;
  std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
  double get_real(std::string_view key, double fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;

  // Rejects keys outside the known set (typo guard).
  void check_known(std::span<const std::string_view> known) const;

  std::uint64_t hash() const;       // over sorted key=value lines
  std::string resolved() const;     // canonical sorted rendering
  std::string hash_hex() const;

 private:
  const std::string* lookup(std::string_view key) const;
  std::vector<std::pair<std::string, std::string>> kv_;
};

}  // namespace plm
