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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "retrolabel/posthoc.hpp"
#include "retrolabel/trajectory.hpp"

namespace retrolabel {

/// A: the step's observation plus the immediately preceding action.
/// B: the step's observation plus every preceding action, in order.
enum class ContextStyle { kA, kB };

std::string_view to_string(ContextStyle style);
ContextStyle context_style_from_string(std::string_view name);

struct SftInstance {
  std::string instruction;
  ContextStyle style = ContextStyle::kB;
  std::string observation;
  std::vector<std::string> previous_actions;  // printed action grammar
  std::string target_reasoning;
  std::string target_action;
  std::string demo_id;
  std::size_t step_index = 0;

  Json to_json() const;
  /// Strict: exactly the known fields, correct types, style invariants.
  /// Throws ParseError otherwise.
  static SftInstance from_json(const Json& j);

  bool operator==(const SftInstance&) const = default;
};

/// One instance per action of the (annotated, stop-terminated) trajectory;
/// instance t targets (reasoning_t, action_t). Throws ExportError at the
/// first step without reasoning.
std::vector<SftInstance> to_sft_instances(const AnnotatedDemonstration& annotated,
                                          ContextStyle style);

std::vector<SftInstance> export_instances(std::span<const AnnotatedDemonstration> demos,
                                          ContextStyle style);

void write_dataset(const std::filesystem::path& path, std::span<const SftInstance> instances);
std::vector<SftInstance> read_dataset(const std::filesystem::path& path);

/// Root verb and object of each instruction by a first-token heuristic with
/// a stop-word list. Approximate by construction; no parsing involved.
struct VerbObjectReport {
  std::map<std::string, std::size_t> verbs;
  std::map<std::string, std::map<std::string, std::size_t>> objects;  // verb -> object -> count
};

struct DatasetStats {
  std::size_t demonstrations = 0;
  std::size_t instance_count = 0;
  /// Keyed by bin lower bound: 1 covers 1-5 words, 6 covers 6-10, ...
  std::map<std::size_t, std::size_t> instruction_words;
  /// Keyed by trajectory action count.
  std::map<std::size_t, std::size_t> trajectory_lengths;
  std::map<std::string, std::size_t> per_site;
  VerbObjectReport verb_objects;

  Json to_json() const;
  std::string to_csv() const;
};

inline constexpr std::size_t kInstructionWordBin = 5;

std::size_t word_count(std::string_view text);

DatasetStats dataset_stats(std::span<const Demonstration> demos);
DatasetStats dataset_stats(std::span<const AnnotatedDemonstration> demos);

}  // namespace retrolabel
