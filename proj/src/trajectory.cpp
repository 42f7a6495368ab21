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

#include "retrolabel/trajectory.hpp"

#include <algorithm>
#include <array>
#include <utility>

#include "retrolabel/error.hpp"

namespace retrolabel {
namespace {

struct KindInfo {
  ActionKind kind;
  std::string_view name;
  bool needs_target;
  bool needs_payload;
  bool allows_payload;
};

constexpr std::array<KindInfo, 10> kKinds{{
    {ActionKind::kClick, "click", true, false, false},
    {ActionKind::kType, "type", true, true, true},
    {ActionKind::kHover, "hover", true, false, false},
    {ActionKind::kScroll, "scroll", false, true, true},
    {ActionKind::kSelect, "select", true, true, true},
    {ActionKind::kGoBack, "go_back", false, false, false},
    {ActionKind::kNewTab, "new_tab", false, false, false},
    {ActionKind::kSwitchTab, "switch_tab", false, true, true},
    {ActionKind::kStop, "stop", false, false, true},
    {ActionKind::kNoop, "noop", false, false, false},
}};

const KindInfo& info(ActionKind kind) {
  return kKinds[static_cast<std::size_t>(kind)];
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::string_view source_name(InstructionSource s) {
  return s == InstructionSource::kRetroactive ? "retroactive" : "external";
}

template <typename T>
std::optional<T> optional_field(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

}  // namespace

std::string_view to_string(ActionKind kind) { return info(kind).name; }

std::optional<ActionKind> action_kind_from_string(std::string_view name) {
  for (const auto& k : kKinds) {
    if (k.name == name) return k.kind;
  }
  return std::nullopt;
}

Action Action::click(std::string target) {
  return {ActionKind::kClick, std::move(target), std::nullopt};
}
Action Action::type(std::string target, std::string text) {
  return {ActionKind::kType, std::move(target), std::move(text)};
}
Action Action::hover(std::string target) {
  return {ActionKind::kHover, std::move(target), std::nullopt};
}
Action Action::scroll(std::string direction) {
  return {ActionKind::kScroll, std::nullopt, std::move(direction)};
}
Action Action::select(std::string target, std::string option) {
  return {ActionKind::kSelect, std::move(target), std::move(option)};
}
Action Action::go_back() { return {ActionKind::kGoBack, {}, {}}; }
Action Action::stop(std::string answer) {
  return {ActionKind::kStop, std::nullopt, std::move(answer)};
}
Action Action::noop() { return {}; }

bool is_valid_element_id(std::string_view id) {
  if (id.empty()) return false;
  return std::none_of(id.begin(), id.end(), [](char c) {
    return c == '[' || c == ']' || c == ' ' || c == '\t' || c == '\n' ||
           c == '\r';
  });
}

std::string action_violation(const Action& action) {
  const auto& k = info(action.kind);
  const std::string name(k.name);
  if (k.needs_target && !action.target) return name + " requires a target";
  if (!k.needs_target && action.target) return name + " forbids a target";
  if (action.target && !is_valid_element_id(*action.target)) {
    return "invalid element id '" + *action.target + "'";
  }
  if (k.needs_payload && !action.payload) return name + " requires a payload";
  if (!k.allows_payload && action.payload) return name + " forbids a payload";
  if (action.payload && action.payload->find_first_of("\r\n") != std::string::npos) {
    return "payload must be a single line";
  }
  if (action.kind == ActionKind::kScroll && *action.payload != "up" &&
      *action.payload != "down") {
    return "scroll direction must be up or down";
  }
  if (action.kind == ActionKind::kSwitchTab &&
      (action.payload->empty() ||
       !std::all_of(action.payload->begin(), action.payload->end(),
                    [](char c) { return c >= '0' && c <= '9'; }))) {
    return "switch_tab requires a numeric tab index";
  }
  return {};
}

std::string print_action(const Action& action) {
  std::string out(to_string(action.kind));
  if (action.target) out += " [" + *action.target + "]";
  if (action.payload) out += " [" + *action.payload + "]";
  return out;
}

Action parse_action(std::string_view text) {
  std::string_view rest = trim(text);
  const auto end_of_kind = rest.find_first_of(" [");
  const auto kind_word = rest.substr(0, end_of_kind);
  const auto kind = action_kind_from_string(kind_word);
  if (!kind) {
    throw ActionError("unknown action kind '" + std::string(kind_word) + "'");
  }
  rest = end_of_kind == std::string_view::npos
             ? std::string_view{}
             : trim(rest.substr(end_of_kind));

  Action action;
  action.kind = *kind;
  const auto& k = info(*kind);
  if (k.needs_target) {
    if (rest.empty() || rest.front() != '[') {
      throw ActionError(std::string(k.name) + " requires [target]");
    }
    const auto close = rest.find(']');
    if (close == std::string_view::npos) throw ActionError("unterminated [target]");
    action.target = std::string(rest.substr(1, close - 1));
    rest = trim(rest.substr(close + 1));
  }
  if (k.allows_payload && !rest.empty()) {
    if (rest.front() != '[' || rest.back() != ']') {
      throw ActionError("malformed payload in '" + std::string(text) + "'");
    }
    action.payload = std::string(rest.substr(1, rest.size() - 2));
    rest = {};
  }
  if (!rest.empty()) {
    throw ActionError("trailing input in '" + std::string(text) + "'");
  }
  if (auto v = action_violation(action); !v.empty()) throw ActionError(v);
  return action;
}

const Observation& Trajectory::observation_at(std::size_t i) const {
  if (i < steps.size()) return steps[i].observation;
  if (i == steps.size()) return final_observation;
  throw RangeError("observation index " + std::to_string(i) +
                   " beyond trajectory of length " +
                   std::to_string(steps.size()));
}

std::string Demonstration::id() const {
  return episode_id + "#" + std::to_string(checkpoint_length);
}

Trajectory prefix(const Trajectory& trajectory, std::size_t k) {
  if (k > trajectory.length()) {
    throw RangeError("prefix length " + std::to_string(k) +
                     " exceeds trajectory length " +
                     std::to_string(trajectory.length()));
  }
  Trajectory out;
  out.steps.assign(trajectory.steps.begin(), trajectory.steps.begin() + k);
  out.final_observation = trajectory.observation_at(k);
  out.episode_id = trajectory.episode_id;
  out.persona = trajectory.persona;
  return out;
}

std::vector<Violation> validate(const Trajectory& trajectory) {
  std::vector<Violation> report;
  const auto n = trajectory.length();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& step = trajectory.steps[i];
    if (step.observation.step_index != i) {
      report.push_back({i, "index discontinuity: observation " +
                               std::to_string(i) + " has step_index " +
                               std::to_string(step.observation.step_index)});
    }
    if (step.observation.text.empty()) {
      report.push_back({i, "empty observation text"});
    }
    if (auto v = action_violation(step.action); !v.empty()) {
      report.push_back({i, "malformed action: " + v});
    }
    if (step.action.is_stop() && i + 1 != n) {
      report.push_back({i, "stop not terminal"});
    }
    if (step.reasoning && step.reasoning->text.empty()) {
      report.push_back({i, "empty reasoning"});
    }
  }
  if (trajectory.final_observation.step_index != n) {
    report.push_back({std::nullopt,
                      "index discontinuity: final observation has step_index " +
                          std::to_string(trajectory.final_observation.step_index)});
  }
  if (trajectory.final_observation.text.empty()) {
    report.push_back({std::nullopt, "empty final observation text"});
  }
  return report;
}

Json to_json(const Observation& obs) {
  Json j{{"text", obs.text}, {"step_index", obs.step_index}};
  j["url_hint"] = obs.url_hint ? Json(*obs.url_hint) : Json(nullptr);
  return j;
}

Json to_json(const Action& action) {
  Json j{{"kind", to_string(action.kind)}};
  j["target"] = action.target ? Json(*action.target) : Json(nullptr);
  j["payload"] = action.payload ? Json(*action.payload) : Json(nullptr);
  return j;
}

Json to_json(const Step& step) {
  Json j{{"observation", to_json(step.observation)},
         {"action", to_json(step.action)}};
  j["reasoning"] = step.reasoning ? Json(step.reasoning->text) : Json(nullptr);
  j["exploration_reasoning"] = step.exploration_reasoning
                                   ? Json(*step.exploration_reasoning)
                                   : Json(nullptr);
  return j;
}

Json to_json(const Persona& persona) {
  return {{"name", persona.name}, {"description", persona.description}};
}

Json to_json(const Trajectory& trajectory) {
  Json steps = Json::array();
  for (const auto& s : trajectory.steps) steps.push_back(to_json(s));
  Json j{{"steps", std::move(steps)},
         {"final_observation", to_json(trajectory.final_observation)},
         {"episode_id", trajectory.episode_id}};
  j["persona"] = trajectory.persona ? to_json(*trajectory.persona) : Json(nullptr);
  return j;
}

Json to_json(const Instruction& instruction) {
  return {{"text", instruction.text}, {"source", source_name(instruction.source)}};
}

Json to_json(const Demonstration& demo) {
  Json j{{"schema_version", kDemonstrationSchemaVersion},
         {"instruction", to_json(demo.instruction)},
         {"trajectory", to_json(demo.trajectory)},
         {"binary_reward", demo.binary_reward},
         {"checkpoint_length", demo.checkpoint_length},
         {"episode_id", demo.episode_id},
         {"site", demo.site},
         {"state_changes", demo.state_changes}};
  j["persona"] = demo.persona ? to_json(*demo.persona) : Json(nullptr);
  return j;
}

Observation observation_from_json(const Json& j) {
  return {j.at("text").get<std::string>(),
          optional_field<std::string>(j, "url_hint"),
          j.at("step_index").get<std::size_t>()};
}

Action action_from_json(const Json& j) {
  const auto name = j.at("kind").get<std::string>();
  const auto kind = action_kind_from_string(name);
  if (!kind) throw ActionError("unknown action kind '" + name + "'");
  return {*kind, optional_field<std::string>(j, "target"),
          optional_field<std::string>(j, "payload")};
}

Step step_from_json(const Json& j) {
  Step s;
  s.observation = observation_from_json(j.at("observation"));
  s.action = action_from_json(j.at("action"));
  if (auto r = optional_field<std::string>(j, "reasoning")) s.reasoning = ReasoningStep{*r};
  s.exploration_reasoning = optional_field<std::string>(j, "exploration_reasoning");
  return s;
}

Persona persona_from_json(const Json& j) {
  return {j.at("name").get<std::string>(), j.at("description").get<std::string>()};
}

Trajectory trajectory_from_json(const Json& j) {
  Trajectory t;
  for (const auto& s : j.at("steps")) t.steps.push_back(step_from_json(s));
  t.final_observation = observation_from_json(j.at("final_observation"));
  t.episode_id = j.at("episode_id").get<std::string>();
  if (auto it = j.find("persona"); it != j.end() && !it->is_null()) {
    t.persona = persona_from_json(*it);
  }
  return t;
}

Instruction instruction_from_json(const Json& j) {
  const auto src = j.at("source").get<std::string>();
  if (src != "retroactive" && src != "external") {
    throw ParseError("unknown instruction source '" + src + "'");
  }
  return {j.at("text").get<std::string>(),
          src == "retroactive" ? InstructionSource::kRetroactive
                               : InstructionSource::kExternal};
}

Demonstration demonstration_from_json(const Json& j) {
  Demonstration d;
  d.instruction = instruction_from_json(j.at("instruction"));
  d.trajectory = trajectory_from_json(j.at("trajectory"));
  d.binary_reward = j.at("binary_reward").get<int>();
  d.checkpoint_length = j.at("checkpoint_length").get<std::size_t>();
  d.episode_id = j.at("episode_id").get<std::string>();
  d.site = j.value("site", std::string{});
  if (auto it = j.find("persona"); it != j.end() && !it->is_null()) {
    d.persona = persona_from_json(*it);
  }
  d.state_changes =
      j.value("state_changes", std::vector<std::string>{});
  return d;
}

}  // namespace retrolabel
