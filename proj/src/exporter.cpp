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

#include "retrolabel/exporter.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "retrolabel/error.hpp"
#include "retrolabel/jsonl.hpp"

namespace retrolabel {
namespace {

const std::set<std::string>& stop_words() {
  static const std::set<std::string> kWords{
      "a",    "an",   "the",  "to",   "for",  "of",   "on",   "in",   "and",  "with",
      "my",   "all",  "this", "that", "from", "at",   "by",   "me",   "your", "their",
      "its",  "it",   "some", "any",  "into", "up",   "out",  "new",  "about", "is",
  };
  return kWords;
}

std::vector<std::string> tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '-' || c == '\'') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

void check_object_keys(const Json& j, std::initializer_list<const char*> keys, const char* what) {
  if (!j.is_object()) throw ParseError(std::string(what) + " must be an object");
  if (j.size() != keys.size()) {
    throw ParseError(std::string(what) + " must have exactly " + std::to_string(keys.size()) +
                     " fields");
  }
  for (const char* k : keys) {
    if (!j.contains(k)) throw ParseError(std::string(what) + " is missing '" + k + "'");
  }
}

const std::string& string_field(const Json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_string()) throw ParseError(std::string("'") + key + "' must be a string");
  return v.get_ref<const std::string&>();
}

template <typename Demo>
const Demonstration& base(const Demo& d) {
  if constexpr (std::is_same_v<Demo, AnnotatedDemonstration>) {
    return d.demo;
  } else {
    return d;
  }
}

template <typename Demo>
DatasetStats stats_over(std::span<const Demo> demos) {
  DatasetStats s;
  s.demonstrations = demos.size();
  for (const auto& item : demos) {
    const auto& d = base(item);
    const auto n = d.trajectory.length();
    s.instance_count += n;
    ++s.trajectory_lengths[n];
    ++s.per_site[d.site];
    const auto words = word_count(d.instruction.text);
    const std::size_t bin = words == 0 ? 0 : (words - 1) / kInstructionWordBin * kInstructionWordBin + 1;
    ++s.instruction_words[bin];

    const auto toks = tokens(d.instruction.text);
    if (toks.empty()) continue;
    ++s.verb_objects.verbs[toks.front()];
    auto obj = std::find_if(toks.begin() + 1, toks.end(), [](const std::string& t) {
      return t.size() >= 3 && !stop_words().count(t);
    });
    if (obj != toks.end()) ++s.verb_objects.objects[toks.front()][*obj];
  }
  return s;
}

}  // namespace

std::string_view to_string(ContextStyle style) { return style == ContextStyle::kA ? "A" : "B"; }

ContextStyle context_style_from_string(std::string_view name) {
  if (name == "A" || name == "a") return ContextStyle::kA;
  if (name == "B" || name == "b") return ContextStyle::kB;
  throw ConfigError("unknown context style '" + std::string(name) + "' (expected A or B)");
}

Json SftInstance::to_json() const {
  return {{"instruction", instruction},
          {"context",
           {{"style", retrolabel::to_string(style)},
            {"observation", observation},
            {"previous_actions", previous_actions}}},
          {"target_reasoning", target_reasoning},
          {"target_action", target_action},
          {"demo_id", demo_id},
          {"step_index", step_index}};
}

SftInstance SftInstance::from_json(const Json& j) {
  check_object_keys(j,
                    {"instruction", "context", "target_reasoning", "target_action", "demo_id",
                     "step_index"},
                    "instance");
  const auto& ctx = j.at("context");
  check_object_keys(ctx, {"style", "observation", "previous_actions"}, "context");

  SftInstance inst;
  inst.instruction = string_field(j, "instruction");
  const auto& style = string_field(ctx, "style");
  if (style != "A" && style != "B") throw ParseError("context.style must be \"A\" or \"B\"");
  inst.style = style == "A" ? ContextStyle::kA : ContextStyle::kB;
  inst.observation = string_field(ctx, "observation");
  const auto& prev = ctx.at("previous_actions");
  if (!prev.is_array()) throw ParseError("context.previous_actions must be an array");
  for (const auto& a : prev) {
    if (!a.is_string()) throw ParseError("context.previous_actions entries must be strings");
    inst.previous_actions.push_back(a.get<std::string>());
  }
  inst.target_reasoning = string_field(j, "target_reasoning");
  inst.target_action = string_field(j, "target_action");
  inst.demo_id = string_field(j, "demo_id");
  if (!j.at("step_index").is_number_unsigned()) {
    throw ParseError("step_index must be a non-negative integer");
  }
  inst.step_index = j.at("step_index").get<std::size_t>();

  if (inst.instruction.empty()) throw ParseError("instruction is empty");
  if (inst.target_reasoning.empty()) throw ParseError("target_reasoning is empty");
  try {
    parse_action(inst.target_action);
  } catch (const ActionError& e) {
    throw ParseError(std::string("target_action: ") + e.what());
  }
  const auto expected_prev = inst.style == ContextStyle::kA
                                 ? std::min<std::size_t>(inst.step_index, 1)
                                 : inst.step_index;
  if (inst.previous_actions.size() != expected_prev) {
    throw ParseError("style " + style + " instance at step " + std::to_string(inst.step_index) +
                     " must carry " + std::to_string(expected_prev) + " previous actions");
  }
  return inst;
}

std::vector<SftInstance> to_sft_instances(const AnnotatedDemonstration& annotated,
                                          ContextStyle style) {
  const auto& demo = annotated.demo;
  const auto& steps = demo.trajectory.steps;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!steps[i].reasoning || steps[i].reasoning->text.empty()) {
      throw ExportError("demonstration " + demo.id() + " is missing reasoning", i);
    }
  }
  if (!demo.trajectory.ends_in_stop()) {
    throw ExportError("demonstration " + demo.id() + " does not end in stop", steps.size());
  }
  std::vector<SftInstance> out;
  out.reserve(steps.size());
  std::vector<std::string> history;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    SftInstance inst;
    inst.instruction = demo.instruction.text;
    inst.style = style;
    inst.observation = steps[i].observation.text;
    if (style == ContextStyle::kB) {
      inst.previous_actions = history;
    } else if (!history.empty()) {
      inst.previous_actions = {history.back()};
    }
    inst.target_reasoning = steps[i].reasoning->text;
    inst.target_action = print_action(steps[i].action);
    inst.demo_id = demo.id();
    inst.step_index = i;
    history.push_back(inst.target_action);
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<SftInstance> export_instances(std::span<const AnnotatedDemonstration> demos,
                                          ContextStyle style) {
  std::vector<SftInstance> out;
  for (const auto& d : demos) {
    auto part = to_sft_instances(d, style);
    out.insert(out.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, std::span<const SftInstance> instances) {
  write_jsonl(path, instances, [](const SftInstance& i) { return i.to_json(); });
}

std::vector<SftInstance> read_dataset(const std::filesystem::path& path) {
  return read_jsonl<SftInstance>(path, [](const Json& j) { return SftInstance::from_json(j); });
}

std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c));
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

DatasetStats dataset_stats(std::span<const Demonstration> demos) { return stats_over(demos); }

DatasetStats dataset_stats(std::span<const AnnotatedDemonstration> demos) {
  return stats_over(demos);
}

Json DatasetStats::to_json() const {
  Json words = Json::object();
  for (const auto& [bin, n] : instruction_words) {
    const auto label = bin == 0 ? std::string("0")
                                : std::to_string(bin) + "-" +
                                      std::to_string(bin + kInstructionWordBin - 1);
    words[label] = n;
  }
  Json lengths = Json::object();
  for (const auto& [len, n] : trajectory_lengths) lengths[std::to_string(len)] = n;
  return {{"demonstrations", demonstrations},
          {"instance_count", instance_count},
          {"instruction_word_histogram", std::move(words)},
          {"trajectory_length_histogram", std::move(lengths)},
          {"per_site", per_site},
          {"verb_object",
           {{"approximate", true},
            {"verbs", verb_objects.verbs},
            {"objects", verb_objects.objects}}}};
}

std::string DatasetStats::to_csv() const {
  std::ostringstream out;
  out << "histogram,bin,count\n";
  for (const auto& [bin, n] : instruction_words) {
    out << "instruction_words," << bin << '-' << bin + kInstructionWordBin - 1 << ',' << n << '\n';
  }
  for (const auto& [len, n] : trajectory_lengths) {
    out << "trajectory_length," << len << ',' << n << '\n';
  }
  for (const auto& [site, n] : per_site) out << "site," << site << ',' << n << '\n';
  return out.str();
}

}  // namespace retrolabel
