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

#include "retrolabel/prompt.hpp"

#include <algorithm>

#include "retrolabel/error.hpp"

namespace retrolabel {
namespace {

constexpr std::array<std::string_view, 7> kRoleNames{
    "explore", "delta", "label", "binary_reward", "retro_reason", "stop_append", "graded_judge",
};

bool is_slot_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

const char* default_text(Role role) {
  switch (role) {
    case Role::kExplore:
      return R"(You are operating a web browser on behalf of a user.

## PERSONA
{persona}

## OBJECTIVE
{objective}

## PREVIOUS ACTIONS
{previous_actions}

## OBSERVATION
{observation}

## RESPONSE FORMAT
Think step by step about the single most useful next action, then finish with
one line of the form
ANSWER: <action>
Actions: click [id] | type [id] [text] | hover [id] | scroll [up|down] |
select [id] [option] | go_back | new_tab | switch_tab [index] | stop [answer] | noop
)";
    case Role::kDelta:
      return R"(Describe in one sentence how the page changed because of the action.

## BEFORE
{before}

## ACTION
{action}

## AFTER
{after}

## RESPONSE FORMAT
ANSWER: <description>
)";
    case Role::kLabel:
      return R"(A user made the following changes while browsing a website.

## STATE CHANGES
{state_changes}

Write the single instruction the user was most plausibly following. It should
be specific enough that another person could carry it out.

## RESPONSE FORMAT
ANSWER: <instruction>
)";
    case Role::kBinaryReward:
      return R"(Decide whether the state changes accomplish the instruction, or a
meaningful sub-task of it.

## INSTRUCTION
{instruction}

## STATE CHANGES
{state_changes}

## RESPONSE FORMAT
ANSWER: 1 if they do, ANSWER: 0 if they do not
)";
    case Role::kRetroReason:
      return R"(A user is following an instruction on a website. Explain, in one or two
sentences, why the given action is a good next step toward the instruction.

## INSTRUCTION
{instruction}

## OBSERVATION
{observation}

## ACTION
{action}

## RESPONSE FORMAT
ANSWER: <reasoning>
)";
    case Role::kStopAppend:
      return R"(The user has finished the steps below. If the instruction asks for a piece of
information, give it; if it only asks to navigate or change something, leave
the answer empty.

## INSTRUCTION
{instruction}

## STATE CHANGES
{state_changes}

## RESPONSE FORMAT
Optionally explain, then finish with
ANSWER: <answer, possibly empty>
)";
    case Role::kGradedJudge:
      return R"(Grade how well the state changes accomplish the instruction.

## INSTRUCTION
{instruction}

## STATE CHANGES
{state_changes}

## RUBRIC
{rubric}

## RESPONSE FORMAT
ANSWER: <integer from 1 to 5>
)";
  }
  return "";
}

}  // namespace

std::string_view to_string(Role role) { return kRoleNames[static_cast<std::size_t>(role)]; }

std::optional<Role> role_from_string(std::string_view name) {
  for (auto role : kAllRoles) {
    if (to_string(role) == name) return role;
  }
  return std::nullopt;
}

PromptTemplate::PromptTemplate(Role role, std::string text) : role_(role), text_(std::move(text)) {
  std::string literal;
  for (std::size_t i = 0; i < text_.size(); ++i) {
    const char c = text_[i];
    if (c == '{' && i + 1 < text_.size() && text_[i + 1] == '{') {
      literal.push_back('{');
      ++i;
    } else if (c == '}' && i + 1 < text_.size() && text_[i + 1] == '}') {
      literal.push_back('}');
      ++i;
    } else if (c == '{') {
      const auto close = text_.find('}', i);
      if (close == std::string::npos) throw ConfigError("unterminated slot in prompt template");
      auto name = text_.substr(i + 1, close - i - 1);
      if (name.empty() || !std::all_of(name.begin(), name.end(), is_slot_char)) {
        throw ConfigError("malformed slot name '{" + name + "}' in prompt template");
      }
      if (!literal.empty()) pieces_.push_back({false, std::move(literal)});
      literal.clear();
      if (std::find(slots_.begin(), slots_.end(), name) == slots_.end()) slots_.push_back(name);
      pieces_.push_back({true, std::move(name)});
      i = close;
    } else if (c == '}') {
      throw ConfigError("unbalanced '}' in prompt template");
    } else {
      literal.push_back(c);
    }
  }
  if (!literal.empty()) pieces_.push_back({false, std::move(literal)});
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& bindings) const {
  std::string out;
  for (const auto& piece : pieces_) {
    if (!piece.is_slot) {
      out += piece.text;
      continue;
    }
    auto it = bindings.find(piece.text);
    if (it == bindings.end()) {
      throw PreconditionError("prompt template '" + std::string(to_string(role_)) +
                              "' has unbound slot '" + piece.text + "'");
    }
    out += it->second;
  }
  return out;
}

const std::vector<std::string>& role_slots(Role role) {
  static const std::array<std::vector<std::string>, 7> kSlots{{
      {"persona", "objective", "previous_actions", "observation"},
      {"before", "action", "after"},
      {"state_changes"},
      {"instruction", "state_changes"},
      {"instruction", "observation", "action"},
      {"instruction", "state_changes"},
      {"instruction", "state_changes", "rubric"},
  }};
  return kSlots[static_cast<std::size_t>(role)];
}

PromptLibrary::PromptLibrary() {
  for (auto role : kAllRoles) templates_.emplace_back(role, default_text(role));
}

const PromptTemplate& PromptLibrary::get(Role role) const {
  return templates_[static_cast<std::size_t>(role)];
}

void PromptLibrary::set(Role role, std::string text) {
  PromptTemplate t(role, std::move(text));
  const auto& allowed = role_slots(role);
  for (const auto& slot : t.slots()) {
    if (std::find(allowed.begin(), allowed.end(), slot) == allowed.end()) {
      throw ConfigError("prompt template '" + std::string(to_string(role)) +
                        "' uses unknown slot '" + slot + "'");
    }
  }
  templates_[static_cast<std::size_t>(role)] = std::move(t);
}

}  // namespace retrolabel
