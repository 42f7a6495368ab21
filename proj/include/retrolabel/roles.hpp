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
#include <span>
#include <string>
#include <vector>

#include "retrolabel/prompt.hpp"
#include "retrolabel/trajectory.hpp"
#include "retrolabel/transport.hpp"

namespace retrolabel {

/// Description of what one action changed on the page.
struct StateChangeSummary {
  std::string text;
  std::size_t transition_index = 0;

  bool operator==(const StateChangeSummary&) const = default;
};

/// Names the unit of work a role call belongs to and numbers its calls, so
/// logs can be put in canonical order and replayed regardless of how work
/// was scheduled. Not thread-safe; one scope per worker task.
class CallScope {
 public:
  explicit CallScope(std::string name) : name_(std::move(name)) {}
  const std::string& name() const { return name_; }
  std::uint64_t next_seq() { return next_seq_++; }

 private:
  std::string name_;
  std::uint64_t next_seq_ = 0;
};

struct RoleOptions {
  std::size_t observation_budget = 20000;  // characters
  std::string rubric{kDefaultRubric};
};

struct ExploreDecision {
  std::string reasoning;
  Action action;
  bool parse_failure = false;
};

struct GradeResult {
  int grade = 1;
  bool clamped = false;
};

/// Value of the last `ANSWER:` line of a reply, or the last non-empty line
/// when the reply has no such line. Trimmed.
std::string extract_answer(std::string_view reply);

/// Text preceding the last `ANSWER:` line, trimmed; empty without one.
std::string extract_rationale(std::string_view reply);

/// Keeps the head of `text`, cut on a UTF-8 boundary, when it exceeds
/// `budget` characters, and marks the cut.
std::string truncate_head(const std::string& text, std::size_t budget);

/// Numbered one-per-line listing, or "None" when empty.
std::string format_actions(std::span<const Action> actions);
std::string format_state_changes(std::span<const StateChangeSummary> changes);

class LmRoles {
 public:
  LmRoles(RoleTransport& transport, PromptLibrary prompts = {}, RoleOptions options = {});

  ExploreDecision explore_action(const Observation& observation, const Persona& persona,
                                 std::span<const Action> previous, CallScope& scope) const;

  /// The instruction-following agent: the explore prompt with the objective
  /// bound to the instruction.
  ExploreDecision agent_action(const Observation& observation, const Instruction& instruction,
                               std::span<const Action> previous, CallScope& scope) const;

  StateChangeSummary summarize_change(const Observation& before, const Action& action,
                                      const Observation& after, std::size_t transition_index,
                                      CallScope& scope) const;

  Instruction label_trajectory(std::span<const StateChangeSummary> deltas, CallScope& scope) const;

  int score_binary(const Instruction& instruction, std::span<const StateChangeSummary> deltas,
                   CallScope& scope) const;

  ReasoningStep retro_reason(const Instruction& instruction, const Observation& observation,
                             const Action& action, CallScope& scope) const;

  /// Adds a terminal stop whose answer comes from the stop role. The stop
  /// step's reasoning is the reply's rationale when it has one. Returns the
  /// input unchanged when it already ends in stop.
  Demonstration append_stop(const Demonstration& demo, CallScope& scope) const;

  GradeResult grade_reward(const Instruction& instruction,
                           std::span<const StateChangeSummary> deltas, CallScope& scope) const;

  /// All transitions of a trajectory, summarized in order.
  std::vector<StateChangeSummary> summarize_all(const Trajectory& trajectory,
                                                CallScope& scope) const;

  const RoleOptions& options() const { return options_; }
  RoleTransport& transport() const { return transport_; }

 private:
  std::string call(Role role, const std::map<std::string, std::string>& bindings,
                   CallScope& scope, int attempt) const;
  ExploreDecision decide(const Observation& observation, const std::string& persona,
                         const std::string& objective, std::span<const Action> previous,
                         CallScope& scope) const;

  RoleTransport& transport_;
  PromptLibrary prompts_;
  RoleOptions options_;
};

inline constexpr std::string_view kExplorationObjective =
    "Explore the website the way this user plausibly would, taking one action at a time.";
inline constexpr std::string_view kNoPersona = "None";

}  // namespace retrolabel
