#include "momentlab/experiment_config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace momentlab {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  for (std::string part; std::getline(ss, part, sep);) out.push_back(trim(part));
  return out;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream ss(text);
  std::size_t lineno = 0;
  for (std::string line; std::getline(ss, line);) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
    if (out.count(key))
      throw std::invalid_argument("config: duplicate key '" + key + "'");
    out[key] = value;
  }
  return out;
}

std::map<std::string, std::string> parse_key_value_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

ResolvedConfig::ResolvedConfig(const std::vector<KeySpec>& spec,
                               const std::map<std::string, std::string>& overrides) {
  for (const auto& k : spec) values_[k.name] = k.fallback;
  for (const auto& [key, value] : overrides) {
    const auto it = values_.find(key);
    if (it == values_.end()) {
      std::string known;
      for (const auto& k : spec) known += (known.empty() ? "" : ", ") + k.name;
      throw std::invalid_argument("config: unknown key '" + key + "' (known: " + known + ")");
    }
    it->second = value;
  }
}

const std::string& ResolvedConfig::str(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end())
    throw std::logic_error("config: key '" + key + "' was never declared");
  return it->second;
}

int64_t ResolvedConfig::i64(const std::string& key) const {
  const std::string& v = str(key);
  char* end = nullptr;
  const long long parsed = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw std::invalid_argument("config: key '" + key + "': '" + v + "' is not an integer");
  return parsed;
}

double ResolvedConfig::f64(const std::string& key) const {
  const std::string& v = str(key);
  char* end = nullptr;
  const double parsed = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw std::invalid_argument("config: key '" + key + "': '" + v + "' is not a number");
  return parsed;
}

bool ResolvedConfig::flag(const std::string& key) const {
  const std::string& v = str(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config: key '" + key + "': '" + v + "' is not a boolean");
}

std::vector<int64_t> ResolvedConfig::i64_list(const std::string& key) const {
  std::vector<int64_t> out;
  for (const std::string& part : split(str(key), ',')) {
    if (part.empty()) continue;
    char* end = nullptr;
    const long long parsed = std::strtoll(part.c_str(), &end, 10);
    if (end == part.c_str() || *end != '\0')
      throw std::invalid_argument("config: key '" + key + "': '" + part +
                                  "' is not an integer");
    out.push_back(parsed);
  }
  if (out.empty())
    throw std::invalid_argument("config: key '" + key + "' needs at least one value");
  return out;
}

std::vector<uint64_t> ResolvedConfig::u64_list(const std::string& key) const {
  std::vector<uint64_t> out;
  for (const int64_t v : i64_list(key)) {
    if (v < 0)
      throw std::invalid_argument("config: key '" + key + "' must be nonnegative");
    out.push_back(static_cast<uint64_t>(v));
  }
  return out;
}

std::vector<double> ResolvedConfig::f64_list(const std::string& key) const {
  std::vector<double> out;
  for (const std::string& part : split(str(key), ',')) {
    if (part.empty()) continue;
    char* end = nullptr;
    const double parsed = std::strtod(part.c_str(), &end);
    if (end == part.c_str() || *end != '\0')
      throw std::invalid_argument("config: key '" + key + "': '" + part +
                                  "' is not a number");
    out.push_back(parsed);
  }
  if (out.empty())
    throw std::invalid_argument("config: key '" + key + "' needs at least one value");
  return out;
}

std::string ResolvedConfig::canonical_text() const {
  std::string out;
  for (const auto& [key, value] : values_) {
    out += key;
    out += '=';
    out += value;
    out += '\n';
  }
  return out;
}

uint64_t ResolvedConfig::hash() const { return fnv1a64(canonical_text()); }

uint64_t fnv1a64(const std::string& text) {
  uint64_t h = 14695981039346656037ull;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace momentlab
