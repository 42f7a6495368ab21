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
#include "retrolabel/trajectory.hpp"
#include "support.hpp"

namespace retrolabel {
namespace {

using testing::make_demo;

Trajectory trajectory_of(std::size_t n) { return make_demo(n).trajectory; }

TEST(PrefixTest, KeepsActionsAndFollowingObservation) {
  const auto t = trajectory_of(8);
  const auto p = prefix(t, 4);
  EXPECT_EQ(p.length(), 4u);
  EXPECT_EQ(p.final_observation, t.steps[4].observation);
  EXPECT_EQ(p.final_observation.step_index, 4u);
  EXPECT_EQ(t.length(), 8u);
}

TEST(PrefixTest, EmptyPrefixEndsAtFirstObservation) {
  const auto t = trajectory_of(8);
  const auto p = prefix(t, 0);
  EXPECT_EQ(p.length(), 0u);
  EXPECT_EQ(p.final_observation, t.steps[0].observation);
}

TEST(PrefixTest, OutOfRangeThrows) {
  EXPECT_THROW(prefix(trajectory_of(8), 9), RangeError);
}

TEST(PrefixTest, FullPrefixIsIdentity) {
  const auto t = trajectory_of(5);
  EXPECT_EQ(prefix(t, 5), t);
}

TEST(PrefixTest, Composes) {
  const auto t = trajectory_of(10);
  for (std::size_t j = 0; j <= 10; ++j) {
    for (std::size_t i = 0; i <= j; ++i) {
      EXPECT_EQ(prefix(prefix(t, j), i), prefix(t, i)) << i << " <= " << j;
    }
  }
}

TEST(PrefixTest, PrefixOfValidIsValid) {
  const auto t = trajectory_of(7);
  ASSERT_TRUE(validate(t).empty());
  for (std::size_t k = 0; k <= t.length(); ++k) EXPECT_TRUE(validate(prefix(t, k)).empty()) << k;
}

TEST(ValidateTest, WellFormedHasNoViolations) { EXPECT_TRUE(validate(trajectory_of(3)).empty()); }

TEST(ValidateTest, StopBeforeTheEnd) {
  auto t = trajectory_of(4);
  t.steps[1].action = Action::stop("x");
  const auto report = validate(t);
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].message, "stop not terminal");
  EXPECT_EQ(report[0].step, 1u);
}

TEST(ValidateTest, IndexDiscontinuity) {
  auto t = trajectory_of(4);
  t.steps[2].observation.step_index = 5;
  const auto report = validate(t);
  ASSERT_FALSE(report.empty());
  EXPECT_NE(report[0].message.find("index discontinuity"), std::string::npos);
}

TEST(ValidateTest, FinalObservationIndex) {
  auto t = trajectory_of(2);
  t.final_observation.step_index = 7;
  EXPECT_FALSE(validate(t).empty());
}

TEST(ValidateTest, MalformedActionAndEmptyText) {
  auto t = trajectory_of(2);
  t.steps[0].action = Action{ActionKind::kType, std::string("box"), std::nullopt};
  t.steps[1].observation.text.clear();
  const auto report = validate(t);
  ASSERT_EQ(report.size(), 2u);
  EXPECT_NE(report[0].message.find("malformed action"), std::string::npos);
  EXPECT_EQ(report[1].message, "empty observation text");
}

TEST(ValidateTest, TerminalStopIsFine) {
  auto t = trajectory_of(3);
  t.steps[2].action = Action::stop("$24.50");
  EXPECT_TRUE(validate(t).empty());
}

TEST(ActionTest, WellFormednessRules) {
  EXPECT_EQ(action_violation(Action::click("a")), "");
  EXPECT_NE(action_violation(Action{ActionKind::kClick, std::nullopt, std::nullopt}), "");
  EXPECT_NE(action_violation(Action{ActionKind::kType, std::string("a"), std::nullopt}), "");
  EXPECT_NE(action_violation(Action{ActionKind::kStop, std::string("a"), std::string("x")}), "");
  EXPECT_EQ(action_violation(Action{ActionKind::kStop, std::nullopt, std::nullopt}), "");
  EXPECT_NE(action_violation(Action::click("has space")), "");
  EXPECT_NE(action_violation(Action::type("box", "two\nlines")), "");
}

TEST(ActionTest, PrintsGrammar) {
  EXPECT_EQ(print_action(Action::type("search-box", "organizer")), "type [search-box] [organizer]");
  EXPECT_EQ(print_action(Action::click("search-btn")), "click [search-btn]");
  EXPECT_EQ(print_action(Action::stop("$24.50")), "stop [$24.50]");
  EXPECT_EQ(print_action(Action::go_back()), "go_back");
  EXPECT_EQ(print_action(Action::scroll("down")), "scroll [down]");
}

TEST(ActionTest, ParsesPayloadWithBrackets) {
  const auto a = parse_action("type [q] [see [this] here]");
  EXPECT_EQ(a, Action::type("q", "see [this] here"));
  EXPECT_EQ(parse_action("stop []"), Action::stop(""));
  EXPECT_EQ(parse_action("stop [a] [b]"), Action::stop("a] [b"));
}

TEST(ActionTest, RejectsGarbage) {
  for (const char* s : {"", "jump [x]", "click", "click []", "type [a]",
                        "go_back [x]", "switch_tab [two]", "scroll [sideways]"}) {
    EXPECT_THROW(parse_action(s), ActionError) << s;
  }
}

Action random_action(std::mt19937& rng) {
  static const std::vector<std::string> ids{"a", "search-box", "item_12", "x.y", "nav-home"};
  static const std::vector<std::string> texts{"",       "organizer", "a b c",  "[x]",
                                              "$24.50", "na]me",     "tail ]", "ünïcode"};
  auto pick = [&](const auto& v) { return v[rng() % v.size()]; };
  switch (rng() % 10) {
    case 0: return Action::click(pick(ids));
    case 1: return Action::type(pick(ids), pick(texts));
    case 2: return Action::hover(pick(ids));
    case 3: return Action::scroll(rng() % 2 ? "up" : "down");
    case 4: return Action::select(pick(ids), pick(texts));
    case 5: return Action::go_back();
    case 6: return Action{ActionKind::kNewTab, std::nullopt, std::nullopt};
    case 7: return Action{ActionKind::kSwitchTab, std::nullopt, std::to_string(rng() % 5)};
    case 8: return Action::stop(pick(texts));
    default: return Action::noop();
  }
}

TEST(ActionTest, PrintParseRoundTrip) {
  std::mt19937 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const auto a = random_action(rng);
    ASSERT_EQ(action_violation(a), "");
    EXPECT_EQ(parse_action(print_action(a)), a) << print_action(a);
  }
}

TEST(SerializationTest, TrajectoryRoundTrip) {
  auto t = trajectory_of(3);
  t.persona = Persona{"bargain hunter", "Looks for discounts."};
  t.steps[0].reasoning = ReasoningStep{"Start."};
  t.steps[1].exploration_reasoning = "Curious.";
  t.steps[1].observation.url_hint = "http://x/";
  EXPECT_EQ(trajectory_from_json(to_json(t)), t);
  EXPECT_EQ(to_json(trajectory_from_json(to_json(t))).dump(), to_json(t).dump());
}

TEST(SerializationTest, DemonstrationRoundTrip) {
  auto d = make_demo(4);
  d.persona = Persona{"p", "d"};
  const auto j = to_json(d);
  EXPECT_EQ(j.at("schema_version"), kDemonstrationSchemaVersion);
  EXPECT_EQ(demonstration_from_json(j), d);
  EXPECT_EQ(d.id(), "site-0000#4");
}

TEST(TrajectoryTest, ObservationAt) {
  const auto t = trajectory_of(2);
  EXPECT_EQ(t.observation_at(1), t.steps[1].observation);
  EXPECT_EQ(t.observation_at(2), t.final_observation);
  EXPECT_THROW(t.observation_at(3), RangeError);
}

}  // namespace
}  // namespace retrolabel
