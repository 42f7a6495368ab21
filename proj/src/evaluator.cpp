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

#include "retrolabel/evaluator.hpp"

#include "retrolabel/jsonl.hpp"

namespace retrolabel {
namespace {

std::string_view kind_name(RewardKind k) { return k == RewardKind::kBinary ? "binary" : "graded"; }

void require_actions(const Trajectory& trajectory) {
  if (trajectory.steps.empty()) throw PreconditionError("cannot judge a trajectory with no actions");
}

}  // namespace

void AgentRunConfig::check() const {
  if (max_steps < 1) throw ConfigError("agent max_steps must be at least 1");
}

Trajectory run_agent(Environment& env, const Instruction& instruction,
                     const AgentRunConfig& config, const LmRoles& roles,
                     const std::string& scope_name) {
  config.check();
  Trajectory traj;
  traj.episode_id = scope_name;
  Observation obs;
  try {
    obs = env.reset(config.reset_seed);
  } catch (const Error& e) {
    throw RunError(std::string("environment reset failed: ") + e.what(), traj);
  }
  CallScope scope(scope_name);
  std::vector<Action> history;
  while (traj.steps.size() < config.max_steps) {
    std::span<const Action> previous(history);
    if (config.style == ContextStyle::kA && !history.empty()) previous = previous.last(1);
    ExploreDecision decision;
    StepResult result;
    try {
      decision = roles.agent_action(obs, instruction, previous, scope);
      result = env.step(decision.action);
    } catch (const Error& e) {
      traj.final_observation = obs;
      throw RunError(e.what(), traj);
    }
    Step step;
    step.observation = obs;
    step.action = decision.action;
    step.exploration_reasoning = decision.reasoning;
    traj.steps.push_back(std::move(step));
    history.push_back(decision.action);
    obs = result.observation;
    if (result.terminal) break;
  }
  traj.final_observation = obs;
  return traj;
}

EvalRecord evaluate_graded(const Instruction& instruction, const Trajectory& trajectory,
                           const LmRoles& roles, const std::string& scope_name) {
  require_actions(trajectory);
  CallScope scope(scope_name);
  EvalRecord rec;
  rec.instruction = instruction;
  rec.trajectory = trajectory;
  rec.kind = RewardKind::kGraded;
  try {
    const auto deltas = roles.summarize_all(trajectory, scope);
    const auto grade = roles.grade_reward(instruction, deltas, scope);
    rec.reward = grade.grade;
    rec.judge.clamped = grade.clamped;
  } catch (const PreconditionError&) {
    throw;
  } catch (const Error& e) {
    throw EvalError(std::string("graded judge failed: ") + e.what());
  }
  rec.judge.role = std::string(to_string(Role::kGradedJudge));
  rec.judge.transport = std::string(to_string(roles.transport().mode()));
  rec.judge.scope = scope_name;
  return rec;
}

EvalRecord evaluate_binary(const Instruction& instruction, const Trajectory& trajectory,
                           const LmRoles& roles, const std::string& scope_name) {
  require_actions(trajectory);
  CallScope scope(scope_name);
  EvalRecord rec;
  rec.instruction = instruction;
  rec.trajectory = trajectory;
  rec.kind = RewardKind::kBinary;
  try {
    const auto deltas = roles.summarize_all(trajectory, scope);
    rec.reward = roles.score_binary(instruction, deltas, scope);
  } catch (const PreconditionError&) {
    throw;
  } catch (const Error& e) {
    throw EvalError(std::string("binary judge failed: ") + e.what());
  }
  rec.judge.role = std::string(to_string(Role::kBinaryReward));
  rec.judge.transport = std::string(to_string(roles.transport().mode()));
  rec.judge.scope = scope_name;
  return rec;
}

double mean_reward(std::span<const EvalRecord> records) {
  if (records.empty()) throw PreconditionError("mean of no records");
  long long sum = 0;
  for (const auto& r : records) {
    if (r.kind != records.front().kind) {
      throw TypeError("cannot average binary and graded rewards together");
    }
    sum += r.reward;
  }
  return static_cast<double>(sum) / static_cast<double>(records.size());
}

double win_rate(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) {
    throw PairingError("win rate needs equal-length runs (" + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw PreconditionError("win rate of no pairs");
  double points = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) {
      points += 1.0;
    } else if (a[i] == b[i]) {
      points += 0.5;
    }
  }
  return points / static_cast<double>(a.size());
}

double win_rate(std::span<const EvalRecord> a, std::span<const EvalRecord> b) {
  if (a.size() != b.size()) {
    throw PairingError("win rate needs equal-length runs (" + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size()) + ")");
  }
  std::vector<int> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].instruction.text != b[i].instruction.text) {
      throw PairingError("pair " + std::to_string(i) + " has different instructions");
    }
    if (a[i].kind != b[i].kind) throw TypeError("pair " + std::to_string(i) + " mixes reward kinds");
    ra.push_back(a[i].reward);
    rb.push_back(b[i].reward);
  }
  return win_rate(std::span<const int>(ra), std::span<const int>(rb));
}

Json eval_summary(std::span<const EvalRecord> records, std::optional<double> win_rate_value) {
  Json j{{"count", records.size()}};
  j["mean"] = records.empty() ? Json(nullptr) : Json(mean_reward(records));
  if (!records.empty()) j["reward_kind"] = kind_name(records.front().kind);
  if (win_rate_value) j["win_rate"] = *win_rate_value;
  return j;
}

Json EvalRecord::to_json() const {
  Json j{{"instruction", retrolabel::to_json(instruction)},
         {"trajectory", retrolabel::to_json(trajectory)},
         {"graded_reward", nullptr},
         {"binary_reward", nullptr},
         {"judge",
          {{"role", judge.role},
           {"transport", judge.transport},
           {"scope", judge.scope},
           {"clamped", judge.clamped}}},
         {"task_success", task_success ? Json(*task_success) : Json(nullptr)}};
  j[kind == RewardKind::kGraded ? "graded_reward" : "binary_reward"] = reward;
  return j;
}

EvalRecord EvalRecord::from_json(const Json& j) {
  EvalRecord r;
  r.instruction = instruction_from_json(j.at("instruction"));
  r.trajectory = trajectory_from_json(j.at("trajectory"));
  const bool graded = j.contains("graded_reward") && !j["graded_reward"].is_null();
  const bool binary = j.contains("binary_reward") && !j["binary_reward"].is_null();
  if (graded == binary) throw ParseError("eval record must carry exactly one reward kind");
  r.kind = graded ? RewardKind::kGraded : RewardKind::kBinary;
  r.reward = j.at(graded ? "graded_reward" : "binary_reward").get<int>();
  if (graded && (r.reward < 1 || r.reward > 5)) throw ParseError("graded_reward outside 1-5");
  if (binary && r.reward != 0 && r.reward != 1) throw ParseError("binary_reward must be 0 or 1");
  const auto& judge = j.at("judge");
  r.judge.role = judge.at("role").get<std::string>();
  r.judge.transport = judge.at("transport").get<std::string>();
  r.judge.scope = judge.at("scope").get<std::string>();
  r.judge.clamped = judge.value("clamped", false);
  if (j.contains("task_success") && !j["task_success"].is_null()) {
    r.task_success = j["task_success"].get<bool>();
  }
  return r;
}

void write_eval_records(const std::filesystem::path& path, std::span<const EvalRecord> records) {
  write_jsonl(path, records, [](const EvalRecord& r) { return r.to_json(); });
}

std::vector<EvalRecord> read_eval_records(const std::filesystem::path& path) {
  return read_jsonl<EvalRecord>(path, [](const Json& j) { return EvalRecord::from_json(j); });
}

}  // namespace retrolabel
