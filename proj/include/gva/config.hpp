#pragma once

// Flat key = value configuration with [sections], '#' comments and typed
// values: booleans, integers, reals, strings and (nested) numeric arrays.
//
//   kind = lqr-cliff
//   seed = 7
//   [train]
//   lr = 0.3
//   hidden = [32]
//   A = [[1, 0.1], [-0.1, 1]]
//
// Keys inside a section are addressed as "section.key".

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gva/numerics.hpp"

namespace gva {

struct ConfigValue {
  using List = std::vector<ConfigValue>;
  std::variant<bool, std::int64_t, double, std::string, List> v;

  friend bool operator==(const ConfigValue&, const ConfigValue&) = default;
};

using ConfigEntries = std::vector<std::pair<std::string, ConfigValue>>;

class Config {
 public:
  Config() = default;
  explicit Config(ConfigEntries entries) : entries_(std::move(entries)) {}

  static Config parse(const std::string& text);
  static Config load(const std::filesystem::path& path);

  /// Canonical text form; parse(serialize()) == *this.
  std::string serialize() const;

  bool has(const std::string& key) const { return find(key) != nullptr; }
  const ConfigValue* find(const std::string& key) const;
  void set(const std::string& key, ConfigValue value);
  const ConfigEntries& entries() const { return entries_; }

  // Typed reads. Each read marks the key as known and records the resolved
  // value (or the default) for effective().
  double real(const std::string& key, double def) const;
  std::int64_t integer(const std::string& key, std::int64_t def) const;
  std::size_t count(const std::string& key, std::size_t def) const;
  bool boolean(const std::string& key, bool def) const;
  std::string string(const std::string& key, const std::string& def) const;
  std::vector<double> reals(const std::string& key, const std::vector<double>& def) const;
  std::vector<std::string> strings(const std::string& key, const std::vector<std::string>& def) const;
  Matrix matrix(const std::string& key, const Matrix& def) const;

  /// Throws ConfigError naming every key that no typed read has touched.
  void reject_unknown() const;
  /// Every key read so far with its resolved value, in read order.
  Config effective() const { return Config(effective_); }

  friend bool operator==(const Config& a, const Config& b) { return a.entries_ == b.entries_; }

 private:
  const ConfigValue* touch(const std::string& key) const;
  void record(const std::string& key, const ConfigValue& value) const;

  ConfigEntries entries_;
  mutable std::vector<std::string> touched_;
  mutable ConfigEntries effective_;
};

}  // namespace gva
