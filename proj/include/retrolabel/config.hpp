// Copyright 2026 The Retrolabel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace retrolabel {

using ConfigValue = std::variant<bool, std::int64_t, double, std::string, std::vector<std::string>>;

enum class ValueType { kBool, kInt, kFloat, kString, kStringList };

std::string_view to_string(ValueType type);

/// Reads the TOML subset used by config files: `[section]` headers,
/// `key = value` pairs with strings, integers, floats, booleans and arrays
/// of strings, `#` comments. Keys come back as `section.key`.
/// Throws ParseError with the offending line.
std::map<std::string, ConfigValue> parse_toml(std::string_view text);

std::string format_value(const ConfigValue& value);

struct KeySpec {
  std::string key;
  ValueType type;
  ConfigValue default_value;
  std::string help;
};

const std::vector<KeySpec>& config_schema();

inline constexpr std::string_view kProfiles[] = {"webarena", "miniwob"};

/// Typed settings. Every key must be in the schema; values are checked
/// against the declared type (integers are accepted where floats are).
class Config {
 public:
  Config();

  /// Schema defaults overlaid with a named profile bundle.
  static Config for_profile(std::string_view profile);

  void merge_file(const std::filesystem::path& path);
  void merge_text(std::string_view text);
  void set(const std::string& key, ConfigValue value);
  /// `key=value`, the value read according to the key's type.
  void apply_override(std::string_view assignment);

  bool get_bool(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  /// Integer key that must not be negative.
  std::size_t get_size(const std::string& key) const;
  double get_float(const std::string& key) const;
  const std::string& get_string(const std::string& key) const;
  const std::vector<std::string>& get_list(const std::string& key) const;

  /// Every key, as a TOML document.
  std::string dump() const;

 private:
  const ConfigValue& at(const std::string& key) const;
  template <class T>
  const T& typed(const std::string& key) const;
  std::map<std::string, ConfigValue> values_;
};

}  // namespace retrolabel
