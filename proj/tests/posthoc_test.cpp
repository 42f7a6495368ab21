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

#include "retrolabel/error.hpp"
#include "retrolabel/mock_lm.hpp"
#include "retrolabel/posthoc.hpp"
#include "support.hpp"

namespace retrolabel {
namespace {

using testing::make_demo;

TEST(AnnotateTest, AddsReasoningAndStop) {
  MockTransport t(heuristic_rules());
  LmRoles roles(t);
  const auto demo = make_demo(3);
  const auto a = annotate(demo, roles);
  ASSERT_EQ(a.demo.trajectory.length(), 4u);
  EXPECT_TRUE(a.demo.trajectory.ends_in_stop());
  for (const auto& s : a.demo.trajectory.steps) {
    ASSERT_TRUE(s.reasoning);
    EXPECT_FALSE(s.reasoning->text.empty());
  }
  EXPECT_TRUE(annotation_violations(a).empty());
  EXPECT_EQ(a.scope, "annotate/site-0000#3");
  EXPECT_EQ(a.calls, 4u);  // three reasons + one stop reply with a rationale
  EXPECT_FALSE(demo.trajectory.steps[0].reasoning);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.demo.trajectory.steps[i].action, demo.trajectory.steps[i].action);
  }
}

TEST(AnnotateTest, StopTerminalDemoGetsNoExtraAction) {
  MockTransport t(heuristic_rules());
  LmRoles roles(t);
  auto demo = make_demo(3);
  demo.trajectory.steps[2].action = Action::stop("done");
  const auto a = annotate(demo, roles);
  EXPECT_EQ(a.demo.trajectory.length(), 3u);
  EXPECT_TRUE(annotation_violations(a).empty());
}

TEST(AnnotateTest, RejectsUnrewardedDemo) {
  MockTransport t(heuristic_rules());
  LmRoles roles(t);
  auto demo = make_demo(3);
  demo.binary_reward = 0;
  EXPECT_THROW(annotate(demo, roles), PreconditionError);
}

TEST(AnnotateTest, FailureNamesTheStep) {
  auto rules = heuristic_rules();
  rules.insert(rules.begin(), {Role::kRetroReason, [](const CompletionRequest& r) -> std::optional<std::string> {
                                 if (r.prompt.find("click [item-2]") != std::string::npos) {
                                   throw TransportError("injected");
                                 }
                                 return std::nullopt;
                               }});
  MockTransport t(rules);
  LmRoles roles(t);
  try {
    annotate(make_demo(4), roles);
    FAIL() << "expected AnnotationError";
  } catch (const AnnotationError& e) {
    EXPECT_EQ(e.step(), 2u);
  }
}

TEST(AnnotateTest, IdempotentOnAnnotated) {
  ReplayTransport empty({});
  LmRoles roles(empty);
  const auto a = testing::make_annotated(4, "site-0001");
  EXPECT_EQ(annotate(a, roles), a);
  EXPECT_EQ(annotate(a.demo, roles).demo, a.demo);
}

TEST(AnnotateTest, ReplayOfLogReproducesAnnotation) {
  MockTransport mock(heuristic_rules());
  RoleLog log;
  LoggingTransport logging(mock, log);
  LmRoles recorded(logging);
  const auto first = annotate(make_demo(5), recorded);
  ReplayTransport replay(log.records());
  LmRoles replayed(replay);
  EXPECT_EQ(annotate(make_demo(5), replayed), first);
  EXPECT_EQ(replay.remaining(), 0u);
}

std::vector<Demonstration> ten_demos() {
  std::vector<Demonstration> demos;
  for (int i = 0; i < 10; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "site-%04d", i);
    demos.push_back(make_demo(2 + i % 3, id, "Open item " + std::to_string(i) + "."));
  }
  return demos;
}

std::vector<MockTransport::Rule> failing_on(const std::string& instruction) {
  auto rules = heuristic_rules();
  rules.insert(rules.begin(), {Role::kRetroReason, [instruction](const CompletionRequest& r) -> std::optional<std::string> {
                                 if (r.prompt.find(instruction) != std::string::npos) return "";
                                 return std::nullopt;
                               }});
  return rules;
}

TEST(BatchAnnotateTest, CollectsFailures) {
  MockTransport t(failing_on("Open item 6."));
  LmRoles roles(t);
  const auto demos = ten_demos();
  const auto b = batch_annotate(demos, roles, 3);
  ASSERT_EQ(b.annotated.size(), 9u);
  ASSERT_EQ(b.failures.size(), 1u);
  EXPECT_EQ(b.failures[0].demo_id, demos[6].id());
  EXPECT_EQ(b.failures[0].step, 0u);
  for (std::size_t i = 0, j = 0; i < demos.size(); ++i) {
    if (i == 6) continue;
    EXPECT_EQ(b.annotated[j++].demo.episode_id, demos[i].episode_id);
  }
}

TEST(BatchAnnotateTest, EmptyInput) {
  MockTransport t(heuristic_rules());
  LmRoles roles(t);
  const auto b = batch_annotate({}, roles, 4);
  EXPECT_TRUE(b.annotated.empty());
  EXPECT_TRUE(b.failures.empty());
}

TEST(BatchAnnotateTest, ParallelismDoesNotChangeOutput) {
  auto run = [](std::size_t workers) {
    MockTransport t(heuristic_rules());
    RoleLog log;
    LoggingTransport logging(t, log);
    LmRoles roles(logging);
    const auto demos = ten_demos();
    auto b = batch_annotate(demos, roles, workers);
    return std::make_pair(b.annotated, log.records());
  };
  EXPECT_EQ(run(1), run(4));
}

TEST(AnnotatedIoTest, RoundTripAndVersion) {
  const std::vector<AnnotatedDemonstration> demos{testing::make_annotated(3, "a"),
                                                  testing::make_annotated(5, "b")};
  testing::TempDir dir;
  write_annotated(dir / "a.jsonl", demos);
  EXPECT_EQ(read_annotated(dir / "a.jsonl"), demos);
  const auto j = demos[0].to_json();
  EXPECT_EQ(j.at("schema_version"), kAnnotatedSchemaVersion);
  auto old = j;
  old["schema_version"] = 1;
  EXPECT_THROW(AnnotatedDemonstration::from_json(old), Error);
}

}  // namespace
}  // namespace retrolabel
