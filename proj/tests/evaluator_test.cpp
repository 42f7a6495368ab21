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

#include <gtest/gtest.h>

#include <random>

#include "retrolabel/error.hpp"
#include "retrolabel/evaluator.hpp"
#include "support.hpp"

namespace retrolabel {
namespace {

using testing::listed_items;

MockTransport search_agent() {
  return MockTransport({{Role::kExplore, [](const CompletionRequest& r) -> std::optional<std::string> {
                           switch (listed_items(r.prompt, "PREVIOUS ACTIONS")) {
                             case 0: return "Search first.\nANSWER: type [search-box] [organizer]";
                             case 1: return "ANSWER: click [search-btn]";
                             default: return "ANSWER: stop [found]";
                           }
                         }}});
}

TEST(RunAgentTest, SearchClickStop) {
  auto t = search_agent();
  LmRoles roles(t);
  FixtureEnvironment env(load_fixture("shopsim"));
  const auto traj = run_agent(env, {"Search for an organizer.", InstructionSource::kExternal},
                              AgentRunConfig{}, roles);
  ASSERT_EQ(traj.length(), 3u);
  EXPECT_TRUE(traj.ends_in_stop());
  EXPECT_EQ(traj.steps[0].action, Action::type("search-box", "organizer"));
  ASSERT_TRUE(traj.steps[0].exploration_reasoning);
  EXPECT_EQ(*traj.steps[0].exploration_reasoning, "Search first.");
  EXPECT_TRUE(validate(traj).empty());
}

TEST(RunAgentTest, MaxStepsBoundsRun) {
  MockTransport t({MockTransport::always(Role::kExplore, "ANSWER: click [more]")});
  LmRoles roles(t);
  testing::CountingEnvironment env;
  AgentRunConfig c;
  c.max_steps = 5;
  const auto traj = run_agent(env, {"Keep going.", InstructionSource::kExternal}, c, roles);
  EXPECT_EQ(traj.length(), 5u);
  EXPECT_FALSE(traj.ends_in_stop());
  c.max_steps = 0;
  EXPECT_THROW(c.check(), ConfigError);
}

TEST(RunAgentTest, StyleALimitsHistory) {
  std::size_t most = 0;
  MockTransport t({{Role::kExplore, [&most](const CompletionRequest& r) -> std::optional<std::string> {
                      most = std::max(most, listed_items(r.prompt, "PREVIOUS ACTIONS"));
                      return "ANSWER: click [more]";
                    }}});
  LmRoles roles(t);
  testing::CountingEnvironment env;
  AgentRunConfig c;
  c.max_steps = 4;
  c.style = ContextStyle::kA;
  run_agent(env, {"Keep going.", InstructionSource::kExternal}, c, roles);
  EXPECT_EQ(most, 1u);
}

class BrokenEnvironment final : public Environment {
 public:
  Observation reset(std::uint64_t) override { throw TransportError("no page"); }
  StepResult step(const Action&) override { throw TransportError("no page"); }
  std::string render() const override { return ""; }
};

TEST(RunAgentTest, ResetFailureIsRunError) {
  auto t = search_agent();
  LmRoles roles(t);
  BrokenEnvironment env;
  EXPECT_THROW(run_agent(env, {"Go.", InstructionSource::kExternal}, AgentRunConfig{}, roles), RunError);
}

TEST(RunAgentTest, TransportFailureCarriesPartialRun) {
  MockTransport t({{Role::kExplore, [](const CompletionRequest& r) -> std::optional<std::string> {
                      if (listed_items(r.prompt, "PREVIOUS ACTIONS") == 2) return std::nullopt;
                      return "ANSWER: click [more]";
                    }}});
  LmRoles roles(t);
  testing::CountingEnvironment env;
  try {
    run_agent(env, {"Go.", InstructionSource::kExternal}, AgentRunConfig{}, roles);
    FAIL() << "expected RunError";
  } catch (const RunError& e) {
    EXPECT_EQ(e.partial().length(), 2u);
  }
}

Trajectory three_steps() { return testing::make_demo(3).trajectory; }

TEST(JudgeTest, GradedReward) {
  MockTransport t({MockTransport::always(Role::kDelta, "ANSWER: changed"),
                   MockTransport::always(Role::kGradedJudge, "Mostly there.\nANSWER: 4")});
  LmRoles roles(t);
  const auto r = evaluate_graded({"Open things.", InstructionSource::kExternal}, three_steps(), roles);
  EXPECT_EQ(r.reward, 4);
  EXPECT_EQ(r.kind, RewardKind::kGraded);
  EXPECT_EQ(r.judge.role, "graded_judge");
  EXPECT_EQ(r.judge.transport, "mock");
  EXPECT_FALSE(r.judge.clamped);
  EXPECT_EQ(EvalRecord::from_json(r.to_json()), r);
}

TEST(JudgeTest, GradeClampedAndRecorded) {
  MockTransport t({MockTransport::always(Role::kDelta, "ANSWER: changed"),
                   MockTransport::always(Role::kGradedJudge, "ANSWER: 7")});
  LmRoles roles(t);
  const auto r = evaluate_graded({"Open things.", InstructionSource::kExternal}, three_steps(), roles);
  EXPECT_EQ(r.reward, 5);
  EXPECT_TRUE(r.judge.clamped);
}

TEST(JudgeTest, NonIntegerGradeIsEvalError) {
  int calls = 0;
  MockTransport t({MockTransport::always(Role::kDelta, "ANSWER: changed"),
                   {Role::kGradedJudge, [&calls](const CompletionRequest&) -> std::optional<std::string> {
                      ++calls;
                      return "ANSWER: great";
                    }}});
  LmRoles roles(t);
  EXPECT_THROW(evaluate_graded({"Open things.", InstructionSource::kExternal}, three_steps(), roles),
               EvalError);
  EXPECT_EQ(calls, 3);
}

TEST(JudgeTest, BinaryReward) {
  MockTransport t({MockTransport::always(Role::kDelta, "ANSWER: changed"),
                   MockTransport::always(Role::kBinaryReward, "ANSWER: 1")});
  LmRoles roles(t);
  const auto r = evaluate_binary({"Open things.", InstructionSource::kExternal}, three_steps(), roles);
  EXPECT_EQ(r.reward, 1);
  EXPECT_EQ(r.kind, RewardKind::kBinary);
  EXPECT_TRUE(r.to_json().at("graded_reward").is_null());
}

TEST(JudgeTest, EmptyTrajectoryIsPrecondition) {
  MockTransport t({});
  LmRoles roles(t);
  EXPECT_THROW(evaluate_graded({"Open.", InstructionSource::kExternal}, Trajectory{}, roles),
               PreconditionError);
  EXPECT_THROW(evaluate_binary({"Open.", InstructionSource::kExternal}, Trajectory{}, roles),
               PreconditionError);
}

EvalRecord record(int reward, RewardKind kind = RewardKind::kGraded, std::string text = "task") {
  EvalRecord r;
  r.instruction = {std::move(text), InstructionSource::kExternal};
  r.trajectory = testing::make_demo(1).trajectory;
  r.kind = kind;
  r.reward = reward;
  r.judge = {kind == RewardKind::kGraded ? "graded_judge" : "binary_reward", "mock", "judge", false};
  return r;
}

TEST(MetricsTest, MeanReward) {
  const std::vector<EvalRecord> rs{record(4), record(3), record(2), record(5)};
  EXPECT_DOUBLE_EQ(mean_reward(rs), 3.5);
  const std::vector<EvalRecord> mixed{record(4), record(1, RewardKind::kBinary)};
  EXPECT_THROW(mean_reward(mixed), TypeError);
  EXPECT_THROW(mean_reward({}), PreconditionError);
}

double wr(std::vector<int> a, std::vector<int> b) { return win_rate(std::span<const int>(a), std::span<const int>(b)); }

TEST(MetricsTest, WinRate) {
  EXPECT_DOUBLE_EQ(wr({5, 1}, {1, 5}), 0.5);
  EXPECT_DOUBLE_EQ(wr({3, 3}, {3, 3}), 0.5);
  EXPECT_DOUBLE_EQ(wr({4, 5}, {2, 1}), 1.0);
  EXPECT_THROW(wr({4}, {2, 1}), PairingError);
  EXPECT_THROW(wr({}, {}), PreconditionError);
}

TEST(MetricsTest, WinRateRecordsPairByInstruction) {
  const std::vector<EvalRecord> a{record(4, RewardKind::kGraded, "x"), record(2, RewardKind::kGraded, "y")};
  const std::vector<EvalRecord> b{record(3, RewardKind::kGraded, "x"), record(2, RewardKind::kGraded, "y")};
  EXPECT_DOUBLE_EQ(win_rate(a, b), 0.75);
  const std::vector<EvalRecord> swapped{b[1], b[0]};
  EXPECT_THROW(win_rate(a, swapped), PairingError);
  const std::vector<EvalRecord> binary{record(1, RewardKind::kBinary, "x"), record(0, RewardKind::kBinary, "y")};
  EXPECT_THROW(win_rate(a, binary), TypeError);
}

TEST(MetricsTest, WinRateSymmetry) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 12;
    std::vector<int> a(n), b(n);
    for (auto& v : a) v = 1 + static_cast<int>(rng() % 5);
    for (auto& v : b) v = 1 + static_cast<int>(rng() % 5);
    EXPECT_NEAR(wr(a, b) + wr(b, a), 1.0, 1e-12);
  }
}

TEST(MetricsTest, SummaryAndIo) {
  const std::vector<EvalRecord> rs{record(4), record(3)};
  const auto s = eval_summary(rs, 0.25);
  EXPECT_EQ(s.at("count"), 2);
  EXPECT_DOUBLE_EQ(s.at("mean").get<double>(), 3.5);
  EXPECT_DOUBLE_EQ(s.at("win_rate").get<double>(), 0.25);
  testing::TempDir dir;
  write_eval_records(dir / "e.jsonl", rs);
  EXPECT_EQ(read_eval_records(dir / "e.jsonl"), rs);
  auto bad = rs[0].to_json();
  bad["graded_reward"] = 9;
  EXPECT_THROW(EvalRecord::from_json(bad), Error);
}

}  // namespace
}  // namespace retrolabel
