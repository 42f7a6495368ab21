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

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "retrolabel/env.hpp"
#include "retrolabel/mock_lm.hpp"
#include "retrolabel/posthoc.hpp"
#include "retrolabel/trajectory.hpp"
#include "retrolabel/transport.hpp"

namespace retrolabel::testing {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

struct TempDir {
  TempDir() {
    static std::atomic<int> n{0};
    path = std::filesystem::temp_directory_path() /
           ("retrolabel-test-" + std::to_string(::getpid()) + "-" + std::to_string(n++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
  std::filesystem::path path;
};

/// Number of "N. ..." lines in a prompt section.
inline std::size_t listed_items(const std::string& prompt, std::string_view section) {
  const auto body = prompt_section(prompt, section);
  if (body == "None") return 0;
  std::istringstream in(body);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && std::isdigit(static_cast<unsigned char>(line[0])) &&
        line.find(". ") != std::string::npos) {
      ++n;
    }
  }
  return n;
}

/// Transport for explorer tests: exploration scrolls, every summary is
/// "changed N", labels name the prefix length, and a checkpoint at length L
/// in scope S passes iff `pass(S, L)`.
inline std::unique_ptr<MockTransport> checkpoint_script(
    std::function<bool(const std::string&, std::size_t)> pass) {
  std::vector<MockTransport::Rule> rules;
  rules.push_back({Role::kExplore, [](const CompletionRequest&) -> std::optional<std::string> {
                     return "Keep looking.\nANSWER: scroll [down]";
                   }});
  rules.push_back({Role::kDelta, [](const CompletionRequest& r) -> std::optional<std::string> {
                     return "ANSWER: The page scrolled (" + std::to_string(r.seq) + ").";
                   }});
  rules.push_back({Role::kLabel, [](const CompletionRequest& r) -> std::optional<std::string> {
                     return "ANSWER: Task covering " +
                            std::to_string(listed_items(r.prompt, "STATE CHANGES")) + " actions.";
                   }});
  rules.push_back({Role::kBinaryReward, [pass](const CompletionRequest& r) -> std::optional<std::string> {
                     const auto n = listed_items(r.prompt, "STATE CHANGES");
                     return std::string("ANSWER: ") + (pass(r.scope, n) ? "1" : "0");
                   }});
  return std::make_unique<MockTransport>(std::move(rules));
}

/// Environment with a single page whose every action is a no-op; the
/// observation text carries the action count so steps are distinguishable.
class CountingEnvironment final : public Environment {
 public:
  Observation reset(std::uint64_t) override {
    count_ = 0;
    return obs();
  }
  StepResult step(const Action& action) override {
    ++count_;
    StepResult r;
    r.observation = obs();
    if (action.is_stop()) {
      r.terminal = true;
      r.answer = action.payload.value_or("");
    }
    return r;
  }
  std::string render() const override { return obs().text; }

 private:
  Observation obs() const {
    return {"RootWebArea 'Counter " + std::to_string(count_) + "'\n[more] button 'More'",
            std::nullopt, count_};
  }
  std::size_t count_ = 0;
};

/// A raw demonstration with `n` click actions on a synthetic page.
inline Demonstration make_demo(std::size_t n, const std::string& episode = "site-0000",
                               const std::string& instruction = "Open the fourth item.") {
  Demonstration d;
  d.instruction = {instruction, InstructionSource::kRetroactive};
  d.episode_id = episode;
  d.site = "site";
  d.checkpoint_length = n;
  d.trajectory.episode_id = episode;
  for (std::size_t i = 0; i < n; ++i) {
    Step s;
    s.observation = {"RootWebArea 'Page " + std::to_string(i) + "'\n[item-" + std::to_string(i) +
                         "] link 'Item " + std::to_string(i) + "'",
                     std::nullopt, i};
    s.action = Action::click("item-" + std::to_string(i));
    d.trajectory.steps.push_back(s);
    d.state_changes.push_back("Opened item " + std::to_string(i) + ".");
  }
  d.trajectory.final_observation = {"RootWebArea 'Page " + std::to_string(n) + "'", std::nullopt, n};
  return d;
}

/// A demonstration already annotated: reasoning everywhere and a final stop.
inline AnnotatedDemonstration make_annotated(std::size_t n_actions, const std::string& episode) {
  auto d = make_demo(n_actions - 1, episode);
  for (auto& s : d.trajectory.steps) s.reasoning = ReasoningStep{"Because " + print_action(s.action)};
  Step stop;
  stop.observation = d.trajectory.final_observation;
  stop.action = Action::stop("");
  stop.reasoning = ReasoningStep{"Done."};
  d.trajectory.steps.push_back(stop);
  d.trajectory.final_observation.step_index = n_actions;
  d.checkpoint_length = n_actions - 1;
  return {d, "annotate/" + d.id(), n_actions};
}

}  // namespace retrolabel::testing
