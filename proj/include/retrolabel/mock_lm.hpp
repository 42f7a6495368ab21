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

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "retrolabel/transport.hpp"

namespace retrolabel {

/// Body of a `## NAME` section of a prompt rendered from the default
/// templates (up to the next section header), trimmed.
std::string prompt_section(std::string_view prompt, std::string_view name);

struct ElementLine {
  std::string id;
  std::string role;
  std::string label;
};

/// Parses `[id] role 'label'` lines out of an observation.
std::vector<ElementLine> parse_elements(std::string_view observation);
/// Text of the `RootWebArea '...'` line, or empty.
std::string parse_title(std::string_view observation);

/// A deterministic rule-based stand-in for every role, reading the default
/// prompt layout. Exploration picks an unvisited element by hashing the
/// persona and history; summaries, labels, rewards and grades are derived
/// from the observations and the state-change text. Good enough to drive the
/// fixture sites end to end without a model.
std::vector<MockTransport::Rule> heuristic_rules();

/// Declarative rules from a JSON array of {"role", "contains"?, "reply"}.
std::vector<MockTransport::Rule> load_mock_rules(const std::filesystem::path& path);

}  // namespace retrolabel
