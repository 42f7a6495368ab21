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

#include "retrolabel/roles.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <thread>

#include "retrolabel/error.hpp"

namespace retrolabel {
namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

bool starts_with_answer(std::string_view line) {
  constexpr std::string_view kTag = "answer:";
  if (line.size() < kTag.size()) return false;
  for (std::size_t i = 0; i < kTag.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(line[i])) != kTag[i]) return false;
  }
  return true;
}

struct AnswerSplit {
  std::string_view rationale;
  std::string_view answer;
};

AnswerSplit split_reply(std::string_view reply) {
  std::optional<AnswerSplit> tagged;
  std::optional<AnswerSplit> last_line;
  std::size_t pos = 0;
  while (pos <= reply.size()) {
    auto nl = reply.find('\n', pos);
    if (nl == std::string_view::npos) nl = reply.size();
    const auto line = trim(reply.substr(pos, nl - pos));
    const auto before = reply.substr(0, pos);
    if (starts_with_answer(line)) {
      tagged = AnswerSplit{trim(before), trim(line.substr(7))};
    } else if (!line.empty()) {
      last_line = AnswerSplit{trim(before), line};
    }
    pos = nl + 1;
  }
  if (tagged) return *tagged;
  if (last_line) return *last_line;
  return {};
}

std::optional<int> parse_int(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  int value = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end || s.empty()) return std::nullopt;
  return value;
}

}  // namespace

std::string extract_answer(std::string_view reply) { return std::string(split_reply(reply).answer); }

std::string extract_rationale(std::string_view reply) {
  return std::string(split_reply(reply).rationale);
}

std::string truncate_head(const std::string& text, std::size_t budget) {
  if (text.size() <= budget) return text;
  std::size_t cut = budget;
  while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
  return text.substr(0, cut) + "\n[truncated " + std::to_string(text.size() - cut) +
         " characters]";
}

std::string format_actions(std::span<const Action> actions) {
  if (actions.empty()) return "None";
  std::string out;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (i) out += '\n';
    out += std::to_string(i + 1) + ". " + print_action(actions[i]);
  }
  return out;
}

std::string format_state_changes(std::span<const StateChangeSummary> changes) {
  if (changes.empty()) return "None";
  std::string out;
  for (std::size_t i = 0; i < changes.size(); ++i) {
    if (i) out += '\n';
    out += std::to_string(i + 1) + ". " + changes[i].text;
  }
  return out;
}

LmRoles::LmRoles(RoleTransport& transport, PromptLibrary prompts, RoleOptions options)
    : transport_(transport), prompts_(std::move(prompts)), options_(std::move(options)) {}

std::string LmRoles::call(Role role, const std::map<std::string, std::string>& bindings,
                          CallScope& scope, int attempt) const {
  const auto& policy = transport_.retry_policy();
  if (attempt > 1 && policy.backoff.count() > 0) std::this_thread::sleep_for(policy.backoff);
  CompletionRequest request;
  request.role = role;
  request.prompt = prompts_.get(role).render(bindings);
  request.scope = scope.name();
  request.seq = scope.next_seq();
  request.attempt = attempt;
  return transport_.complete(request);
}

ExploreDecision LmRoles::decide(const Observation& observation, const std::string& persona,
                                const std::string& objective, std::span<const Action> previous,
                                CallScope& scope) const {
  if (observation.text.empty()) throw PreconditionError("explore: empty observation");
  const std::map<std::string, std::string> bindings{
      {"persona", persona},
      {"objective", objective},
      {"previous_actions", format_actions(previous)},
      {"observation", truncate_head(observation.text, options_.observation_budget)},
  };
  const int attempts = std::max(1, transport_.retry_policy().max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    const auto reply = call(Role::kExplore, bindings, scope, attempt);
    try {
      auto action = parse_action(extract_answer(reply));
      return {extract_rationale(reply), std::move(action), false};
    } catch (const ActionError&) {
    }
  }
  return {"", Action::noop(), true};
}

ExploreDecision LmRoles::explore_action(const Observation& observation, const Persona& persona,
                                        std::span<const Action> previous,
                                        CallScope& scope) const {
  return decide(observation, persona.name + ": " + persona.description,
                std::string(kExplorationObjective), previous, scope);
}

ExploreDecision LmRoles::agent_action(const Observation& observation,
                                      const Instruction& instruction,
                                      std::span<const Action> previous, CallScope& scope) const {
  if (instruction.text.empty()) throw PreconditionError("agent: empty instruction");
  return decide(observation, std::string(kNoPersona), instruction.text, previous, scope);
}

StateChangeSummary LmRoles::summarize_change(const Observation& before, const Action& action,
                                             const Observation& after,
                                             std::size_t transition_index,
                                             CallScope& scope) const {
  if (before.text.empty() || after.text.empty()) {
    throw PreconditionError("summarize_change: observations must be rendered");
  }
  const std::map<std::string, std::string> bindings{
      {"before", truncate_head(before.text, options_.observation_budget)},
      {"action", print_action(action)},
      {"after", truncate_head(after.text, options_.observation_budget)},
  };
  const int attempts = std::max(1, transport_.retry_policy().max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    auto text = extract_answer(call(Role::kDelta, bindings, scope, attempt));
    if (!text.empty()) return {std::move(text), transition_index};
  }
  throw RoleError("summarize_change: empty summary after " + std::to_string(attempts) +
                  " attempts");
}

Instruction LmRoles::label_trajectory(std::span<const StateChangeSummary> deltas,
                                      CallScope& scope) const {
  if (deltas.empty()) throw PreconditionError("label_trajectory: no state changes");
  const std::map<std::string, std::string> bindings{
      {"state_changes", format_state_changes(deltas)}};
  const int attempts = std::max(1, transport_.retry_policy().max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    auto text = extract_answer(call(Role::kLabel, bindings, scope, attempt));
    if (!text.empty()) return {std::move(text), InstructionSource::kRetroactive};
  }
  throw RoleError("label_trajectory: no instruction after " + std::to_string(attempts) +
                  " attempts");
}

int LmRoles::score_binary(const Instruction& instruction,
                          std::span<const StateChangeSummary> deltas, CallScope& scope) const {
  if (instruction.text.empty() || deltas.empty()) {
    throw PreconditionError("score_binary: instruction and state changes must be non-empty");
  }
  const std::map<std::string, std::string> bindings{
      {"instruction", instruction.text}, {"state_changes", format_state_changes(deltas)}};
  const int attempts = std::max(1, transport_.retry_policy().max_attempts);
  std::string last;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    last = extract_answer(call(Role::kBinaryReward, bindings, scope, attempt));
    if (last == "0") return 0;
    if (last == "1") return 1;
  }
  throw RoleError("score_binary: reply '" + last + "' is not 0 or 1 after " +
                  std::to_string(attempts) + " attempts");
}

ReasoningStep LmRoles::retro_reason(const Instruction& instruction, const Observation& observation,
                                    const Action& action, CallScope& scope) const {
  if (instruction.text.empty()) throw PreconditionError("retro_reason: empty instruction");
  const std::map<std::string, std::string> bindings{
      {"instruction", instruction.text},
      {"observation", truncate_head(observation.text, options_.observation_budget)},
      {"action", print_action(action)},
  };
  const int attempts = std::max(1, transport_.retry_policy().max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    auto text = extract_answer(call(Role::kRetroReason, bindings, scope, attempt));
    if (!text.empty()) return {std::move(text)};
  }
  throw RoleError("retro_reason: empty reasoning after " + std::to_string(attempts) +
                  " attempts");
}

std::vector<StateChangeSummary> LmRoles::summarize_all(const Trajectory& trajectory,
                                                       CallScope& scope) const {
  std::vector<StateChangeSummary> out;
  for (std::size_t i = 0; i < trajectory.length(); ++i) {
    out.push_back(summarize_change(trajectory.steps[i].observation, trajectory.steps[i].action,
                                   trajectory.observation_at(i + 1), i, scope));
  }
  return out;
}

Demonstration LmRoles::append_stop(const Demonstration& demo, CallScope& scope) const {
  if (demo.trajectory.ends_in_stop()) return demo;
  if (demo.instruction.text.empty()) throw PreconditionError("append_stop: empty instruction");

  std::vector<StateChangeSummary> deltas;
  if (demo.state_changes.size() == demo.trajectory.length()) {
    for (std::size_t i = 0; i < demo.state_changes.size(); ++i) {
      deltas.push_back({demo.state_changes[i], i});
    }
  } else {
    deltas = summarize_all(demo.trajectory, scope);
  }
  const std::map<std::string, std::string> bindings{
      {"instruction", demo.instruction.text}, {"state_changes", format_state_changes(deltas)}};
  const auto reply = call(Role::kStopAppend, bindings, scope, 1);

  Demonstration out = demo;
  Step stop;
  stop.observation = demo.trajectory.final_observation;
  stop.action = Action::stop(extract_answer(reply));
  if (auto rationale = extract_rationale(reply); !rationale.empty()) {
    stop.reasoning = ReasoningStep{std::move(rationale)};
  }
  out.trajectory.steps.push_back(std::move(stop));
  out.trajectory.final_observation.step_index = out.trajectory.length();
  return out;
}

GradeResult LmRoles::grade_reward(const Instruction& instruction,
                                  std::span<const StateChangeSummary> deltas,
                                  CallScope& scope) const {
  if (instruction.text.empty() || deltas.empty()) {
    throw PreconditionError("grade_reward: instruction and state changes must be non-empty");
  }
  const std::map<std::string, std::string> bindings{
      {"instruction", instruction.text},
      {"state_changes", format_state_changes(deltas)},
      {"rubric", options_.rubric},
  };
  const int attempts = std::max(1, transport_.retry_policy().max_attempts);
  std::string last;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    last = extract_answer(call(Role::kGradedJudge, bindings, scope, attempt));
    if (auto value = parse_int(last)) {
      const int clamped = std::clamp(*value, 1, 5);
      return {clamped, clamped != *value};
    }
  }
  throw RoleError("grade_reward: reply '" + last + "' is not an integer after " +
                  std::to_string(attempts) + " attempts");
}

}  // namespace retrolabel
