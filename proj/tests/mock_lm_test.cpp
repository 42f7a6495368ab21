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

#include "retrolabel/env.hpp"
#include "retrolabel/error.hpp"
#include "retrolabel/mock_lm.hpp"
#include "retrolabel/roles.hpp"
#include "support.hpp"

namespace retrolabel {
namespace {

TEST(MockLmTest, ParsesObservationLines) {
  const auto obs = "RootWebArea 'Shop'\n[a] button 'Go now'\n[b-2] link 'It''s'\nnoise";
  EXPECT_EQ(parse_title(obs), "Shop");
  const auto els = parse_elements(obs);
  ASSERT_GE(els.size(), 1u);
  EXPECT_EQ(els[0].id, "a");
  EXPECT_EQ(els[0].role, "button");
  EXPECT_EQ(els[0].label, "Go now");
}

TEST(MockLmTest, PromptSection) {
  const std::string p = "## ONE\nfirst\n\n## TWO\nsecond\nline\n";
  EXPECT_EQ(prompt_section(p, "ONE"), "first");
  EXPECT_EQ(prompt_section(p, "TWO"), "second\nline");
  EXPECT_EQ(prompt_section(p, "THREE"), "");
}

TEST(MockLmTest, HeuristicsDriveFixtureDeterministically) {
  const auto site = load_fixture("shopsim");
  auto run = [&] {
    MockTransport t(heuristic_rules());
    LmRoles roles(t);
    FixtureEnvironment env(site);
    auto obs = env.reset(0);
    CallScope scope("run");
    std::vector<Action> history;
    std::vector<std::string> summaries;
    for (int i = 0; i < 10; ++i) {
      const auto d = roles.explore_action(obs, {"home cook", "Equips a kitchen."}, history, scope);
      EXPECT_FALSE(d.parse_failure);
      const auto r = env.step(d.action);
      summaries.push_back(roles.summarize_change(obs, d.action, r.observation, i, scope).text);
      history.push_back(d.action);
      obs = r.observation;
      if (r.terminal) break;
    }
    return std::make_pair(history, summaries);
  };
  const auto a = run();
  EXPECT_EQ(a, run());
  EXPECT_GE(a.first.size(), 4u);
}

TEST(MockLmTest, RuleFile) {
  testing::TempDir dir;
  testing::write_file(dir / "rules.json", R"([
    {"role": "label", "contains": "cart", "reply": "ANSWER: Open the cart."},
    {"role": "label", "reply": "ANSWER: Browse."}
  ])");
  MockTransport t(load_mock_rules(dir / "rules.json"));
  CompletionRequest r;
  r.role = Role::kLabel;
  r.prompt = "the cart page";
  EXPECT_EQ(t.complete(r), "ANSWER: Open the cart.");
  r.prompt = "elsewhere";
  EXPECT_EQ(t.complete(r), "ANSWER: Browse.");
  testing::write_file(dir / "bad.json", R"([{"role": "oracle", "reply": "x"}])");
  EXPECT_THROW(load_mock_rules(dir / "bad.json"), Error);
}

}  // namespace
}  // namespace retrolabel
