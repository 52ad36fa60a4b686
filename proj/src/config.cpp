#include "plm/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace plm {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

}  // namespace

Config Config::parse(std::string_view text) {
  Config c;
  std::size_t pos = 0;
  std::int64_t line_no = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    std::string_view key = trim(line.substr(0, eq));
    std::string_view value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    c.set(key, value);
  }
  return c;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

bool Config::has(std::string_view key) const { return lookup(key) != nullptr; }

void Config::set(std::string_view key, std::string_view value) {
  for (auto& [k, v] : kv_)
    if (k == key) {
      v = std::string(value);
      return;
    }
  kv_.emplace_back(std::string(key), std::string(value));
}

const std::string* Config::lookup(std::string_view key) const {
  for (const auto& [k, v] : kv_)
    if (k == key) return &v;
  return nullptr;
}

std::string Config::get_str(std::string_view key, std::string_view fallback) const {
  const std::string* v = lookup(key);
  return v ? *v : std::string(fallback);
}

std::int64_t Config::get_int(std::string_view key, std::int64_t fallback) const {
  const std::string* v = lookup(key);
  if (!v) return fallback;
  std::int64_t out{};
  auto res = std::from_chars(v->data(), v->data() + v->size(), out);
  if (res.ec != std::errc{} || res.ptr != v->data() + v->size())
    throw ConfigError("config key " + std::string(key) + " is not an integer: " + *v);
  return out;
}

double Config::get_real(std::string_view key, double fallback) const {
  const std::string* v = lookup(key);
  if (!v) return fallback;
  try {
    std::size_t idx = 0;
    double out = std::stod(*v, &idx);
    if (idx != v->size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key " + std::string(key) + " is not a number: " + *v);
  }
}

bool Config::get_bool(std::string_view key, bool fallback) const {
  const std::string* v = lookup(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  throw ConfigError("config key " + std::string(key) + " is not a bool: " + *v);
}

void Config::check_known(std::span<const std::string_view> known) const {
  for (const auto& [k, v] : kv_) {
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw ConfigError("unknown config key: " + k);
  }
}

std::string Config::resolved() const {
  std::vector<std::pair<std::string, std::string>> sorted = kv_;
  std::sort(sorted.begin(), sorted.end());
  std::string out;
  for (const auto& [k, v] : sorted) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

std::uint64_t Config::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : resolved()) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string Config::hash_hex() const {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash()));
  return buf;
}

}  // namespace plm
