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

#include "riemann/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "riemann/errors.hpp"

namespace riemann::cli {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  for (char c : key) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '.';
    if (!ok) return false;
  }
  return true;
}

std::int64_t parse_int(const std::string& key, std::string_view text) {
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigInvalid("config key " + key + ": not an integer: " + std::string(text));
  return value;
}

double parse_double(const std::string& key, std::string_view text) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigInvalid("config key " + key + ": not a number: " + std::string(text));
  return value;
}

std::vector<std::string> split_list(const std::string& key, std::string_view text) {
  std::vector<std::string> items;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view item = trim(text.substr(start, end - start));
    if (item.empty())
      throw ConfigInvalid("config key " + key + ": empty list element");
    items.emplace_back(item);
    start = end + 1;
  }
  return items;
}

}  // namespace

ConfigMap ConfigMap::parse(std::string_view text) {
  ConfigMap map;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigInvalid("config line " + std::to_string(line_no) +
                          ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (!valid_key(key))
      throw ConfigInvalid("config line " + std::to_string(line_no) +
                          ": bad key '" + key + "'");
    if (value.empty())
      throw ConfigInvalid("config key " + key + ": empty value");
    if (!map.values_.emplace(key, value).second)
      throw ConfigInvalid("config key " + key + ": duplicate");
  }
  return map;
}

ConfigMap ConfigMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  if (in.bad()) throw IoFailure("error reading config file " + path.string());
  ConfigMap map = parse(text.str());
  const std::filesystem::path dir = path.parent_path();
  map.source_dir_ = dir.empty() ? std::filesystem::path(".") : dir;
  return map;
}

void ConfigMap::override_value(const std::string& key, std::string value) {
  values_[key] = std::move(value);
}

std::string ConfigMap::take(const std::string& key) {
  const auto it = values_.find(key);
  if (it == values_.end())
    throw ConfigInvalid("config key " + key + ": required but missing");
  read_.insert(key);
  resolved_[key] = it->second;
  return it->second;
}

std::string ConfigMap::get_string(const std::string& key) { return take(key); }

std::string ConfigMap::get_string(const std::string& key,
                                  const std::string& fallback) {
  if (!contains(key)) {
    resolved_[key] = fallback;
    return fallback;
  }
  return take(key);
}

std::int64_t ConfigMap::get_int(const std::string& key) {
  return parse_int(key, take(key));
}

std::int64_t ConfigMap::get_int(const std::string& key, std::int64_t fallback) {
  if (!contains(key)) {
    resolved_[key] = std::to_string(fallback);
    return fallback;
  }
  return parse_int(key, take(key));
}

std::uint64_t ConfigMap::get_u64(const std::string& key, std::uint64_t fallback) {
  if (!contains(key)) {
    resolved_[key] = std::to_string(fallback);
    return fallback;
  }
  const std::string text = take(key);
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigInvalid("config key " + key + ": not an unsigned integer: " + text);
  return value;
}

double ConfigMap::get_double(const std::string& key) {
  return parse_double(key, take(key));
}

double ConfigMap::get_double(const std::string& key, double fallback) {
  if (!contains(key)) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.17g", fallback);
    resolved_[key] = buffer;
    return fallback;
  }
  return parse_double(key, take(key));
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) {
  if (!contains(key)) {
    resolved_[key] = fallback ? "true" : "false";
    return fallback;
  }
  const std::string text = take(key);
  if (text == "true") return true;
  if (text == "false") return false;
  throw ConfigInvalid("config key " + key + ": expected true or false: " + text);
}

std::vector<std::string> ConfigMap::get_list(const std::string& key) {
  return split_list(key, take(key));
}

std::vector<std::int64_t> ConfigMap::get_int_list(const std::string& key) {
  std::vector<std::int64_t> values;
  for (const std::string& item : get_list(key)) values.push_back(parse_int(key, item));
  return values;
}

std::vector<double> ConfigMap::get_double_list(const std::string& key) {
  std::vector<double> values;
  for (const std::string& item : get_list(key)) values.push_back(parse_double(key, item));
  return values;
}

void ConfigMap::reject_unread() const {
  for (const auto& [key, value] : values_)
    if (read_.count(key) == 0)
      throw ConfigInvalid("config key " + key + ": unknown or unused by this subcommand");
}

std::vector<std::pair<std::string, std::string>> ConfigMap::resolved() const {
  return {resolved_.begin(), resolved_.end()};
}

graph::ModulePtr parse_model_layers(const std::string& text, int input_dim) {
  if (input_dim <= 0) throw ConfigInvalid("model.input_dim must be positive");
  std::vector<graph::ModulePtr> stages;
  int width = input_dim;
  for (const std::string& stage : split_list("model.layers", text)) {
    std::istringstream words(stage);
    std::string name;
    words >> name;
    if (name == "linear") {
      std::int64_t out = 0;
      if (!(words >> out) || out <= 0)
        throw ConfigInvalid("model.layers: linear needs a positive width: " + stage);
      stages.push_back(graph::linear(width, static_cast<int>(out)));
      width = static_cast<int>(out);
    } else if (name == "bias") {
      stages.push_back(graph::bias(width));
    } else if (name == "tanh") {
      stages.push_back(graph::pointwise(graph::Activation::kTanh, width));
    } else if (name == "relu") {
      stages.push_back(graph::pointwise(graph::Activation::kRelu, width));
    } else {
      throw ConfigInvalid("model.layers: unknown stage '" + stage + "'");
    }
    std::string rest;
    if (words >> rest)
      throw ConfigInvalid("model.layers: trailing tokens in stage '" + stage + "'");
  }
  if (stages.empty()) throw ConfigInvalid("model.layers: no stages");
  return graph::compose_sequential(std::move(stages));
}

}  // namespace riemann::cli
