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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "retrolabel/trajectory.hpp"

namespace retrolabel {

// ---------------------------------------------------------------------------
// Site definitions
//
// A fixture site is an explicit transition table over pages. Pages hold
// elements rendered as accessibility-tree lines; labels may interpolate slot
// values (`{query}`, `{cart.count}`), and a `for_each` element expands into
// one line per entry of a list slot.
// ---------------------------------------------------------------------------

struct ElementSpec {
  std::string id;  // for for_each elements: id prefix, suffixed with 1..n
  std::string role;
  std::string label;
  std::optional<std::string> for_each;  // list slot to expand over
};

struct PageSpec {
  std::string title;
  std::string url;
  std::vector<ElementSpec> elements;
};

struct Effect {
  enum class Op { kSet, kAppend, kRemove, kClear };
  Op op = Op::kSet;
  std::string slot;
  std::string value;  // may reference {payload} or other slots
};

struct Transition {
  std::string page;  // "*" matches every page
  ActionKind kind = ActionKind::kClick;
  std::optional<std::string> target;
  std::optional<std::string> payload;
  std::optional<std::string> next;  // unset: stay on the current page
  std::vector<Effect> effects;
};

struct Predicate {
  enum class Kind { kPageIs, kSlotEquals, kListContains, kListEmpty, kAnswerEquals, kAnswerContains };
  Kind kind = Kind::kPageIs;
  std::string slot;
  std::string value;
};

struct TaskSpec {
  std::string id;
  std::string description;
  std::vector<Predicate> require;  // conjunction
};

struct SiteDefinition {
  std::string name;
  std::string initial_page;
  std::map<std::string, PageSpec> pages;
  std::vector<Transition> transitions;  // first match in declaration order wins
  std::vector<TaskSpec> tasks;
};

/// Throws ConfigError describing the first broken invariant.
void check_site(const SiteDefinition& site);

/// Parses and checks a site definition.
SiteDefinition site_from_json(const Json& j);
SiteDefinition load_site(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Episode state
// ---------------------------------------------------------------------------

struct EnvState {
  std::string page;
  std::map<std::string, std::string> slots;
  std::map<std::string, std::vector<std::string>> lists;
  std::vector<std::string> history;
  std::size_t action_counter = 0;
  bool terminal = false;
  std::optional<std::string> answer;

  bool operator==(const EnvState&) const = default;
};

/// Title line followed by one `[id] role 'label'` line per element.
std::string render_observation(const SiteDefinition& site, const EnvState& state);

/// 1 iff every predicate of the task holds. Throws LookupError for unknown ids.
int check_task(const SiteDefinition& site, const std::string& task_id,
               const EnvState& final_state, const std::string& answer);

inline constexpr std::string_view kNoOpNotice = "(nothing happened)";

struct StepResult {
  Observation observation;
  bool terminal = false;
  std::optional<std::string> answer;  // set on terminal
  bool no_op = false;
};

/// Anything the explorer and the agent runner can drive.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual Observation reset(std::uint64_t seed) = 0;
  virtual StepResult step(const Action& action) = 0;
  virtual std::string render() const = 0;
};

class FixtureEnvironment final : public Environment {
 public:
  explicit FixtureEnvironment(std::shared_ptr<const SiteDefinition> site);

  Observation reset(std::uint64_t seed) override;
  StepResult step(const Action& action) override;
  std::string render() const override;

  const EnvState& state() const { return state_; }
  const SiteDefinition& site() const { return *site_; }

 private:
  Observation observe(std::string text) const;
  const Transition* match(const Action& action) const;
  void apply(const Transition& transition, const Action& action);

  std::shared_ptr<const SiteDefinition> site_;
  EnvState state_;
  bool live_ = false;
};

/// Directory of the bundled fixture sites and persona rosters.
std::filesystem::path default_data_dir();

/// Loads `<data_dir>/sites/<name>.json`.
std::shared_ptr<const SiteDefinition> load_fixture(const std::string& name,
                                                   const std::filesystem::path& data_dir = default_data_dir());

/// Loads `<data_dir>/personas/<site>.json` (an array of {name, description}).
std::vector<Persona> load_personas(const std::string& site,
                                   const std::filesystem::path& data_dir = default_data_dir());

}  // namespace retrolabel
