// Copyright 2026 The Riemann Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Flat key-value run configuration.  One `key = value` pair per line, `#`
// starts a comment line, keys use dotted sections (optimizer.learning_rate).
// Every key read is echoed, with its effective value, into a resolved
// snapshot that runs embed in their artifact headers; keys never read are
// rejected so typos cannot silently fall back to defaults.

#ifndef RIEMANN_CLI_CONFIG_HPP
#define RIEMANN_CLI_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "riemann/module_graph.hpp"

namespace riemann::cli {

class ConfigMap {
 public:
  /// Parses config text.  Throws ConfigInvalid on malformed lines, bad key
  /// characters, empty values, or duplicate keys.
  static ConfigMap parse(std::string_view text);

  /// Reads and parses a config file.  Throws IoFailure when the file cannot
  /// be read; parse errors as in parse().
  static ConfigMap load(const std::filesystem::path& path);

  /// Replaces (or inserts) a value before any reads, e.g. a --seed flag.
  void override_value(const std::string& key, std::string value);

  bool contains(const std::string& key) const { return values_.count(key) > 0; }

  /// Directory of the file this map was loaded from; "." for parsed text.
  /// Relative dataset paths resolve against it.
  const std::filesystem::path& source_dir() const { return source_dir_; }

  // Each getter marks the key consumed and records the effective value.
  // Getters without a fallback throw ConfigInvalid when the key is absent;
  // all of them throw ConfigInvalid when the value does not parse fully.
  std::string get_string(const std::string& key);
  std::string get_string(const std::string& key, const std::string& fallback);
  std::int64_t get_int(const std::string& key);
  std::int64_t get_int(const std::string& key, std::int64_t fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  double get_double(const std::string& key);
  double get_double(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);
  /// Comma-separated list; every element trimmed and nonempty.
  std::vector<std::string> get_list(const std::string& key);
  std::vector<std::int64_t> get_int_list(const std::string& key);
  std::vector<double> get_double_list(const std::string& key);

  /// Throws ConfigInvalid naming the first key that was present but never
  /// read by the active subcommand.
  void reject_unread() const;

  /// The effective configuration: every key read, with the value used,
  /// including applied defaults.  Sorted by key.
  std::vector<std::pair<std::string, std::string>> resolved() const;

 private:
  std::string take(const std::string& key);

  std::map<std::string, std::string> values_;
  std::set<std::string> read_;
  std::map<std::string, std::string> resolved_;
  std::filesystem::path source_dir_ = ".";
};

/// Builds the network described by a comma-separated stage list, e.g.
/// "linear 16, bias, tanh, linear 1".  Stages: `linear <out>`, `bias`,
/// `tanh`, `relu`.  Widths chain from input_dim through each stage.  Throws
/// ConfigInvalid naming the offending stage.
graph::ModulePtr parse_model_layers(const std::string& text, int input_dim);

}  // namespace riemann::cli

#endif  // RIEMANN_CLI_CONFIG_HPP
