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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "retrolabel/env.hpp"
#include "retrolabel/error.hpp"
#include "retrolabel/exporter.hpp"
#include "retrolabel/roles.hpp"
#include "retrolabel/trajectory.hpp"

namespace retrolabel {

struct AgentRunConfig {
  std::size_t max_steps = 30;
  ContextStyle style = ContextStyle::kB;
  std::uint64_t reset_seed = 0;

  void check() const;
};

/// Agent failure mid-run; carries what was executed before the failure.
class RunError : public EvalError {
 public:
  RunError(const std::string& what, Trajectory partial)
      : EvalError(what), partial_(std::move(partial)) {}
  const Trajectory& partial() const { return partial_; }

 private:
  Trajectory partial_;
};

/// Resets `env` and lets the agent act until it stops, the environment
/// terminates, or max_steps actions have been taken.
Trajectory run_agent(Environment& env, const Instruction& instruction,
                     const AgentRunConfig& config, const LmRoles& roles,
                     const std::string& scope_name = "agent");

enum class RewardKind { kBinary, kGraded };

struct JudgeProvenance {
  std::string role;       // "binary_reward" or "graded_judge"
  std::string transport;  // live, replay, mock
  std::string scope;
  bool clamped = false;

  bool operator==(const JudgeProvenance&) const = default;
};

struct EvalRecord {
  Instruction instruction;
  Trajectory trajectory;
  RewardKind kind = RewardKind::kGraded;
  int reward = 0;
  JudgeProvenance judge;
  /// Ground-truth check of a fixture task, when the record came from one.
  std::optional<bool> task_success;

  Json to_json() const;
  static EvalRecord from_json(const Json& j);

  bool operator==(const EvalRecord&) const = default;
};

/// Summarizes every transition and asks the graded judge for 1-5.
EvalRecord evaluate_graded(const Instruction& instruction, const Trajectory& trajectory,
                           const LmRoles& roles, const std::string& scope_name = "judge");

EvalRecord evaluate_binary(const Instruction& instruction, const Trajectory& trajectory,
                           const LmRoles& roles, const std::string& scope_name = "judge");

double mean_reward(std::span<const EvalRecord> records);

/// Share of pairs where a's reward beats b's, ties counting half. Pairs
/// must agree on instruction text.
double win_rate(std::span<const EvalRecord> a, std::span<const EvalRecord> b);
double win_rate(std::span<const int> a, std::span<const int> b);

/// {count, mean, win_rate?}
Json eval_summary(std::span<const EvalRecord> records,
                  std::optional<double> win_rate_value = std::nullopt);

void write_eval_records(const std::filesystem::path& path, std::span<const EvalRecord> records);
std::vector<EvalRecord> read_eval_records(const std::filesystem::path& path);

}  // namespace retrolabel
