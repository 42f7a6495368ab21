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

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace retrolabel {

/// The language-model roles of the pipeline. The instruction-following agent
/// reuses kExplore with its objective slot bound to the instruction.
enum class Role {
  kExplore,
  kDelta,
  kLabel,
  kBinaryReward,
  kRetroReason,
  kStopAppend,
  kGradedJudge,
};

inline constexpr std::array<Role, 7> kAllRoles{
    Role::kExplore,     Role::kDelta,      Role::kLabel,      Role::kBinaryReward,
    Role::kRetroReason, Role::kStopAppend, Role::kGradedJudge,
};

std::string_view to_string(Role role);
std::optional<Role> role_from_string(std::string_view name);

/// Template text with `{slot}` placeholders; `{{` and `}}` are literal braces.
class PromptTemplate {
 public:
  /// Throws ConfigError on unbalanced braces or malformed slot names.
  PromptTemplate(Role role, std::string text);

  Role role() const { return role_; }
  const std::string& text() const { return text_; }
  /// Distinct slot names in order of first appearance.
  const std::vector<std::string>& slots() const { return slots_; }

  /// Throws PreconditionError naming the first unbound slot. Extra bindings
  /// are ignored.
  std::string render(const std::map<std::string, std::string>& bindings) const;

 private:
  struct Piece {
    bool is_slot;
    std::string text;
  };

  Role role_;
  std::string text_;
  std::vector<Piece> pieces_;
  std::vector<std::string> slots_;
};

/// Slots each role's caller binds.
const std::vector<std::string>& role_slots(Role role);

/// One template per role. Starts from the built-in defaults; overrides may use
/// any subset of the role's slots but no others.
class PromptLibrary {
 public:
  PromptLibrary();

  const PromptTemplate& get(Role role) const;
  void set(Role role, std::string text);

 private:
  std::vector<PromptTemplate> templates_;
};

inline constexpr std::string_view kDefaultRubric =
    "5: every part of the instruction is accomplished. "
    "4: accomplished with a minor omission. "
    "3: substantial progress but an important part is missing. "
    "2: some relevant progress on the instruction. "
    "1: nothing relevant to the instruction was accomplished.";

}  // namespace retrolabel
