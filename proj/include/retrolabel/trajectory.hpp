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

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace retrolabel {

using Json = nlohmann::json;

/// Text rendering of a page at one point in an episode.
struct Observation {
  std::string text;
  std::optional<std::string> url_hint;
  std::size_t step_index = 0;

  bool operator==(const Observation&) const = default;
};

enum class ActionKind {
  kClick,
  kType,
  kHover,
  kScroll,
  kSelect,
  kGoBack,
  kNewTab,
  kSwitchTab,
  kStop,
  kNoop,
};

std::string_view to_string(ActionKind kind);
std::optional<ActionKind> action_kind_from_string(std::string_view name);

struct Action {
  ActionKind kind = ActionKind::kNoop;
  std::optional<std::string> target;
  std::optional<std::string> payload;

  static Action click(std::string target);
  static Action type(std::string target, std::string text);
  static Action hover(std::string target);
  static Action scroll(std::string direction);
  static Action select(std::string target, std::string option);
  static Action go_back();
  static Action stop(std::string answer);
  static Action noop();

  bool is_stop() const { return kind == ActionKind::kStop; }
  bool operator==(const Action&) const = default;
};

/// Empty string when the action is well formed, otherwise the first rule it
/// breaks.
std::string action_violation(const Action& action);

/// Prints the bracketed action grammar, e.g. `type [search-box] [organizer]`.
std::string print_action(const Action& action);

/// Inverse of print_action. Throws ActionError on anything outside the
/// grammar. The final bracket group extends to the last `]`, so payloads may
/// themselves contain brackets.
Action parse_action(std::string_view text);

/// Element ids the grammar can carry: non-empty, no whitespace or brackets.
bool is_valid_element_id(std::string_view id);

struct ReasoningStep {
  std::string text;

  bool operator==(const ReasoningStep&) const = default;
};

struct Step {
  Observation observation;
  std::optional<ReasoningStep> reasoning;  // set only by post-hoc annotation
  Action action;
  std::optional<std::string> exploration_reasoning;  // provenance

  bool operator==(const Step&) const = default;
};

struct Persona {
  std::string name;
  std::string description;

  bool operator==(const Persona&) const = default;
};

struct Trajectory {
  std::vector<Step> steps;
  Observation final_observation;
  std::string episode_id;
  std::optional<Persona> persona;

  std::size_t length() const { return steps.size(); }
  bool ends_in_stop() const {
    return !steps.empty() && steps.back().action.is_stop();
  }
  /// Observation preceding action i (0-based), or the final observation for
  /// i == length().
  const Observation& observation_at(std::size_t i) const;

  bool operator==(const Trajectory&) const = default;
};

enum class InstructionSource { kRetroactive, kExternal };

struct Instruction {
  std::string text;
  InstructionSource source = InstructionSource::kRetroactive;

  bool operator==(const Instruction&) const = default;
};

struct Demonstration {
  Instruction instruction;
  Trajectory trajectory;
  int binary_reward = 1;
  std::size_t checkpoint_length = 0;
  std::string episode_id;
  std::string site;
  std::optional<Persona> persona;
  /// The state-change summaries the instruction was labeled from, one per
  /// transition of the trajectory at labeling time.
  std::vector<std::string> state_changes;

  /// Stable id used by exporters and logs: `<episode_id>#<checkpoint_length>`.
  std::string id() const;

  bool operator==(const Demonstration&) const = default;
};

/// First k steps of a trajectory; the final observation becomes the one
/// following action k. Throws RangeError when k > length().
Trajectory prefix(const Trajectory& trajectory, std::size_t k);

struct Violation {
  std::optional<std::size_t> step;
  std::string message;

  bool operator==(const Violation&) const = default;
};

/// Report-style check of the trajectory invariants; empty means valid.
std::vector<Violation> validate(const Trajectory& trajectory);

// Canonical JSON. nlohmann::json keeps object keys sorted, which gives the
// stable key order the determinism checks rely on.
Json to_json(const Observation& obs);
Json to_json(const Action& action);
Json to_json(const Step& step);
Json to_json(const Persona& persona);
Json to_json(const Trajectory& trajectory);
Json to_json(const Instruction& instruction);
Json to_json(const Demonstration& demo);

Observation observation_from_json(const Json& j);
Action action_from_json(const Json& j);
Step step_from_json(const Json& j);
Persona persona_from_json(const Json& j);
Trajectory trajectory_from_json(const Json& j);
Instruction instruction_from_json(const Json& j);
Demonstration demonstration_from_json(const Json& j);

inline constexpr int kDemonstrationSchemaVersion = 1;

}  // namespace retrolabel
