#pragma once

// Plain-text key=value configuration for experiments. Lines hold one
// `key = value` pair each; blank lines and '#' comments are skipped. Every
// experiment declares its keys with defaults, and a file mentioning a key
// outside that list is rejected, so a typo cannot silently fall back to a
// default.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "momentlab/types.hpp"

namespace momentlab {

struct KeySpec {
  std::string name;
  std::string fallback;  // default value, textual
  std::string help;
};

std::map<std::string, std::string> parse_key_values(const std::string& text);
std::map<std::string, std::string> parse_key_value_file(const std::string& path);

// Defaults plus overrides, with unknown keys rejected.
class ResolvedConfig {
 public:
  ResolvedConfig(const std::vector<KeySpec>& spec,
                 const std::map<std::string, std::string>& overrides);

  const std::string& str(const std::string& key) const;
  int64_t i64(const std::string& key) const;
  double f64(const std::string& key) const;
  bool flag(const std::string& key) const;  // true/false, 1/0, yes/no, on/off
  std::vector<int64_t> i64_list(const std::string& key) const;  // comma separated
  std::vector<uint64_t> u64_list(const std::string& key) const;
  std::vector<double> f64_list(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

  // sorted "key=value" lines; the config hash is FNV-1a 64 of this text
  std::string canonical_text() const;
  uint64_t hash() const;

 private:
  std::map<std::string, std::string> values_;
};

uint64_t fnv1a64(const std::string& text);

}  // namespace momentlab
