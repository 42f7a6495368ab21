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

#include "retrolabel/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "retrolabel/error.hpp"

namespace retrolabel {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool bare_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

bool valid_bare_key(std::string_view k) {
  return !k.empty() && std::all_of(k.begin(), k.end(), bare_key_char);
}

// Drops a trailing comment, ignoring '#' inside strings.
std::string_view strip_comment(std::string_view line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (quote == '"' && c == '\\') {
        ++i;
      } else if (c == quote) {
        quote = 0;
      }
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

class ValueReader {
 public:
  ValueReader(std::string_view text, std::size_t line) : s_(text), line_(line) {}

  ConfigValue read_value() {
    skip_ws();
    if (at_end()) fail("missing value");
    const char c = s_[pos_];
    ConfigValue v;
    if (c == '"' || c == '\'') {
      v = read_string();
    } else if (c == '[') {
      v = read_array();
    } else {
      v = read_scalar();
    }
    skip_ws();
    if (!at_end()) fail("unexpected text after value");
    return v;
  }

 private:
  bool at_end() const { return pos_ >= s_.size(); }
  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line_); }

  std::string read_string() {
    const char quote = s_[pos_++];
    std::string out;
    while (true) {
      if (at_end()) fail("unterminated string");
      const char c = s_[pos_++];
      if (c == quote) break;
      if (c == '\n') fail("newline in string");
      if (quote == '"' && c == '\\') {
        if (at_end()) fail("unterminated escape");
        const char e = s_[pos_++];
        switch (e) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case 'r': out.push_back('\r'); break;
          case '"': out.push_back('"'); break;
          case '\\': out.push_back('\\'); break;
          default: fail(std::string("unknown escape \\") + e);
        }
      } else {
        out.push_back(c);
      }
    }
    return out;
  }

  std::vector<std::string> read_array() {
    ++pos_;  // '['
    std::vector<std::string> out;
    skip_ws();
    if (!at_end() && s_[pos_] == ']') {
      ++pos_;
      return out;
    }
    while (true) {
      skip_ws();
      if (at_end()) fail("unterminated array");
      if (s_[pos_] != '"' && s_[pos_] != '\'') fail("arrays may only hold strings");
      out.push_back(read_string());
      skip_ws();
      if (at_end()) fail("unterminated array");
      if (s_[pos_] == ',') {
        ++pos_;
        skip_ws();
        if (!at_end() && s_[pos_] == ']') {
          ++pos_;
          return out;
        }
        continue;
      }
      if (s_[pos_] == ']') {
        ++pos_;
        return out;
      }
      fail("expected ',' or ']' in array");
    }
  }

  ConfigValue read_scalar() {
    const std::size_t start = pos_;
    while (!at_end() && !std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    const std::string_view tok = s_.substr(start, pos_ - start);
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string digits;
    for (char c : tok) {
      if (c != '_') digits.push_back(c);
    }
    if (digits.empty()) fail("empty value");
    const bool is_float = digits.find_first_of(".eE") != std::string::npos ||
                          digits == "inf" || digits == "+inf" || digits == "-inf" ||
                          digits == "nan";
    if (!is_float) {
      std::int64_t v = 0;
      const char* b = digits.data() + (digits[0] == '+' ? 1 : 0);
      const char* e = digits.data() + digits.size();
      auto [p, ec] = std::from_chars(b, e, v);
      if (ec == std::errc() && p == e) return v;
      fail("invalid value '" + std::string(tok) + "'");
    }
    try {
      std::size_t used = 0;
      const double v = std::stod(digits, &used);
      if (used == digits.size()) return v;
    } catch (const std::exception&) {
    }
    fail("invalid value '" + std::string(tok) + "'");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t line_;
};

// Brackets still open after this text, outside strings.
int bracket_depth(std::string_view text) {
  int depth = 0;
  char quote = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quote) {
      if (quote == '"' && c == '\\') {
        ++i;
      } else if (c == quote) {
        quote = 0;
      }
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '[') {
      ++depth;
    } else if (c == ']') {
      --depth;
    }
  }
  return depth;
}

ValueType type_of(const ConfigValue& v) { return static_cast<ValueType>(v.index()); }

const KeySpec* find_spec(const std::string& key) {
  for (const auto& spec : config_schema()) {
    if (spec.key == key) return &spec;
  }
  return nullptr;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  return out + "\"";
}

}  // namespace

std::string_view to_string(ValueType type) {
  switch (type) {
    case ValueType::kBool: return "boolean";
    case ValueType::kInt: return "integer";
    case ValueType::kFloat: return "float";
    case ValueType::kString: return "string";
    case ValueType::kStringList: return "string array";
  }
  return "?";
}

std::map<std::string, ConfigValue> parse_toml(std::string_view text) {
  std::map<std::string, ConfigValue> out;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::size_t first_line = lineno;
    std::string logical{strip_comment(raw)};
    if (trim(logical).empty()) continue;

    const auto t = trim(logical);
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) throw ParseError("malformed section header", lineno);
      const auto name = trim(t.substr(1, t.size() - 2));
      if (!valid_bare_key(name)) throw ParseError("invalid section name", lineno);
      section = std::string(name);
      continue;
    }

    const auto eq = logical.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", lineno);
    // Multi-line arrays continue until their brackets balance.
    while (bracket_depth(std::string_view(logical).substr(eq + 1)) > 0) {
      if (!std::getline(in, raw)) throw ParseError("unterminated array", first_line);
      ++lineno;
      logical += ' ';
      logical += strip_comment(raw);
    }
    const auto key = trim(std::string_view(logical).substr(0, eq));
    if (!valid_bare_key(key)) throw ParseError("invalid key '" + std::string(key) + "'", first_line);
    if (section.empty()) throw ParseError("key outside of a section", first_line);
    const std::string full = section + "." + std::string(key);
    if (out.count(full)) throw ParseError("duplicate key '" + full + "'", first_line);
    out[full] = ValueReader(std::string_view(logical).substr(eq + 1), first_line).read_value();
  }
  return out;
}

std::string format_value(const ConfigValue& value) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, bool>) {
          return v ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          return std::to_string(v);
        } else if constexpr (std::is_same_v<T, double>) {
          std::ostringstream o;
          o.precision(17);
          o << v;
          auto s = o.str();
          if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
          return s;
        } else if constexpr (std::is_same_v<T, std::string>) {
          return quote(v);
        } else {
          std::string s = "[";
          for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) s += ", ";
            s += quote(v[i]);
          }
          return s + "]";
        }
      },
      value);
}

const std::vector<KeySpec>& config_schema() {
  using S = std::string;
  using L = std::vector<std::string>;
  static const std::vector<KeySpec> kSchema{
      {"run.seed", ValueType::kInt, std::int64_t{0}, "campaign seed"},
      {"run.out", ValueType::kString, S("out"), "output directory"},
      {"run.parallelism", ValueType::kInt, std::int64_t{1}, "worker count"},
      {"run.data_dir", ValueType::kString, S(""), "fixture directory (empty: bundled data)"},
      {"sites.names", ValueType::kStringList, L{"shopsim"}, "sites to explore"},
      {"sites.bridge_command", ValueType::kStringList, L{},
       "external environment process; '--site <name>' is appended (empty: fixtures)"},
      {"sites.bridge_address", ValueType::kString, S(""), "external environment host:port"},
      {"explore.t_max", ValueType::kInt, std::int64_t{40}, "maximum actions per episode"},
      {"explore.prune_interval", ValueType::kInt, std::int64_t{4}, "actions between checkpoints"},
      {"explore.final_check", ValueType::kBool, true, "check the trajectory when an episode ends"},
      {"explore.episodes_per_site", ValueType::kInt, std::int64_t{50}, "episodes per site"},
      {"explore.persona_types", ValueType::kInt, std::int64_t{16}, "personas used per site (0: all)"},
      {"explore.dedup_longest", ValueType::kBool, false, "keep only an episode's longest demonstration"},
      {"transport.mode", ValueType::kString, S("mock"), "live, replay or mock"},
      {"transport.replay_log", ValueType::kString, S(""), "role log replayed in replay mode"},
      {"transport.mock_rules", ValueType::kString, S(""), "mock rule table (empty: built-in heuristics)"},
      {"transport.base_url", ValueType::kString, S("http://127.0.0.1:8000"), "chat-completion server"},
      {"transport.model", ValueType::kString, S("gpt-4o-mini"), "model name sent to the server"},
      {"transport.temperature", ValueType::kFloat, 1.0, "sampling temperature"},
      {"transport.api_key_env", ValueType::kString, S("OPENAI_API_KEY"), "variable holding the API key"},
      {"transport.timeout_seconds", ValueType::kInt, std::int64_t{120}, "request timeout"},
      {"transport.max_attempts", ValueType::kInt, std::int64_t{3}, "attempts per call in live mode"},
      {"transport.record", ValueType::kBool, true, "write the role log"},
      {"roles.observation_budget", ValueType::kInt, std::int64_t{20000}, "observation characters kept"},
      {"roles.rubric_file", ValueType::kString, S(""), "graded-judge rubric (empty: built-in)"},
      {"roles.prompts_dir", ValueType::kString, S(""), "directory of <role>.txt template overrides"},
      {"export.style", ValueType::kString, S("B"), "context style: A (previous action) or B (all)"},
      {"evaluate.max_steps", ValueType::kInt, std::int64_t{30}, "agent action cap"},
      {"evaluate.reward", ValueType::kString, S("graded"), "graded or binary"},
      {"evaluate.source", ValueType::kString, S("tasks"),
       "tasks (fixture tasks) or demos (demonstration instructions, paired with the agent)"},
      {"evaluate.instructions", ValueType::kString, S(""),
       "JSONL of {site, instruction[, task]} (empty: fixture tasks)"},
      {"evaluate.demos", ValueType::kString, S(""), "demonstrations for source=demos"},
      {"evaluate.limit", ValueType::kInt, std::int64_t{0}, "maximum evaluated instructions (0: all)"},
      {"evaluate.baseline", ValueType::kString, S(""), "eval records compared by win rate"},
  };
  return kSchema;
}

Config::Config() {
  for (const auto& spec : config_schema()) values_[spec.key] = spec.default_value;
}

Config Config::for_profile(std::string_view profile) {
  Config c;
  if (profile == "webarena") {
    c.set("explore.t_max", std::int64_t{40});
    c.set("explore.prune_interval", std::int64_t{4});
    c.set("explore.episodes_per_site", std::int64_t{50});
    c.set("explore.persona_types", std::int64_t{16});
    c.set("evaluate.max_steps", std::int64_t{30});
    c.set("export.style", std::string("B"));
  } else if (profile == "miniwob") {
    c.set("explore.t_max", std::int64_t{20});
    c.set("explore.prune_interval", std::int64_t{4});
    c.set("explore.episodes_per_site", std::int64_t{80});
    c.set("explore.persona_types", std::int64_t{10});
    c.set("evaluate.max_steps", std::int64_t{20});
    c.set("export.style", std::string("A"));
  } else {
    throw ConfigError("unknown profile '" + std::string(profile) + "' (expected webarena or miniwob)");
  }
  return c;
}

void Config::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    merge_text(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path.filename().string() + ": " + e.what());
  }
}

void Config::merge_text(std::string_view text) {
  for (auto& [key, value] : parse_toml(text)) set(key, std::move(value));
}

void Config::set(const std::string& key, ConfigValue value) {
  const auto* spec = find_spec(key);
  if (!spec) throw ConfigError("unknown config key '" + key + "'");
  if (spec->type == ValueType::kFloat && type_of(value) == ValueType::kInt) {
    value = static_cast<double>(std::get<std::int64_t>(value));
  }
  if (type_of(value) != spec->type) {
    throw ConfigError("config key '" + key + "' expects " + std::string(to_string(spec->type)) +
                      ", got " + std::string(to_string(type_of(value))));
  }
  values_[key] = std::move(value);
}

void Config::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  const std::string key{trim(assignment.substr(0, eq))};
  const auto raw = trim(assignment.substr(eq + 1));
  const auto* spec = find_spec(key);
  if (!spec) throw ConfigError("unknown config key '" + key + "'");

  ConfigValue value;
  if (spec->type == ValueType::kString && !raw.empty() && raw.front() != '"' && raw.front() != '\'') {
    value = std::string(raw);
  } else if (spec->type == ValueType::kStringList && !raw.empty() && raw.front() != '[') {
    std::vector<std::string> items;
    std::string_view rest = raw;
    while (true) {
      const auto comma = rest.find(',');
      items.emplace_back(trim(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    value = std::move(items);
  } else if (spec->type == ValueType::kString && raw.empty()) {
    value = std::string();
  } else {
    try {
      value = ValueReader(raw, 0).read_value();
    } catch (const ParseError& e) {
      throw ConfigError("override for '" + key + "': " + e.what());
    }
  }
  set(key, std::move(value));
}

const ConfigValue& Config::at(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

template <class T>
const T& Config::typed(const std::string& key) const {
  const auto& v = at(key);
  if (const auto* p = std::get_if<T>(&v)) return *p;
  throw ConfigError("config key '" + key + "' is a " +
                    std::string(to_string(static_cast<ValueType>(v.index()))));
}

bool Config::get_bool(const std::string& key) const { return typed<bool>(key); }
std::int64_t Config::get_int(const std::string& key) const { return typed<std::int64_t>(key); }
std::size_t Config::get_size(const std::string& key) const {
  const auto v = get_int(key);
  if (v < 0) throw ConfigError("config key '" + key + "' must not be negative");
  return static_cast<std::size_t>(v);
}
double Config::get_float(const std::string& key) const { return typed<double>(key); }
const std::string& Config::get_string(const std::string& key) const {
  return typed<std::string>(key);
}
const std::vector<std::string>& Config::get_list(const std::string& key) const {
  return typed<std::vector<std::string>>(key);
}

std::string Config::dump() const {
  std::ostringstream out;
  std::string section;
  for (const auto& spec : config_schema()) {
    const auto dot = spec.key.find('.');
    const auto sec = spec.key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out << '\n';
      out << '[' << sec << "]\n";
      section = sec;
    }
    out << spec.key.substr(dot + 1) << " = " << format_value(values_.at(spec.key)) << '\n';
  }
  return out.str();
}

}  // namespace retrolabel
