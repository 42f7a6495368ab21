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

#include "retrolabel/mock_lm.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <regex>
#include <sstream>

#include "retrolabel/env.hpp"
#include "retrolabel/error.hpp"
#include "retrolabel/roles.hpp"

namespace retrolabel {
namespace {

std::string trim_copy(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return std::string(s.substr(b, s.find_last_not_of(ws) - b + 1));
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

/// Lines of a numbered list section with the "N. " prefix removed.
std::vector<std::string> numbered_items(const std::string& section) {
  std::vector<std::string> out;
  if (section == "None") return out;
  std::istringstream in(section);
  std::string line;
  while (std::getline(in, line)) {
    auto dot = line.find(". ");
    if (dot != std::string::npos && dot > 0 &&
        std::all_of(line.begin(), line.begin() + static_cast<std::ptrdiff_t>(dot),
                    [](unsigned char c) { return std::isdigit(c); })) {
      out.push_back(line.substr(dot + 2));
    } else if (!trim_copy(line).empty()) {
      out.push_back(trim_copy(line));
    }
  }
  return out;
}

constexpr std::string_view kNoEffect = "The action had no visible effect on the page.";

bool is_meaningful(const std::string& change) {
  return change.find("no visible effect") == std::string::npos;
}

std::optional<ElementLine> find_element(const std::vector<ElementLine>& elements,
                                        const std::optional<std::string>& id) {
  if (!id) return std::nullopt;
  for (const auto& e : elements) {
    if (e.id == *id) return e;
  }
  return std::nullopt;
}

std::string describe(const std::optional<ElementLine>& el, const Action& action) {
  if (el) return "the '" + el->label + "' " + el->role;
  if (action.target) return "element " + *action.target;
  return "the page";
}

std::string explore_reply(const CompletionRequest& r) {
  const auto persona = prompt_section(r.prompt, "PERSONA");
  const auto objective = prompt_section(r.prompt, "OBJECTIVE");
  const auto previous = numbered_items(prompt_section(r.prompt, "PREVIOUS ACTIONS"));
  const auto observation = prompt_section(r.prompt, "OBSERVATION");
  const auto elements = parse_elements(observation);
  const auto title = parse_title(observation);
  const bool agent_mode = persona == kNoPersona;

  if (agent_mode && previous.size() >= 3) {
    return "The objective looks complete.\nANSWER: stop []";
  }

  // Words from link labels feed the text typed into search boxes.
  std::vector<std::string> words;
  for (const auto& e : elements) {
    if (e.role != "link") continue;
    std::istringstream in(e.label);
    std::string w;
    while (in >> w) {
      if (w.size() >= 4 && std::all_of(w.begin(), w.end(), [](unsigned char c) {
            return std::isalpha(c);
          })) {
        words.push_back(lower(w));
      }
    }
  }
  const auto seed = fnv1a(persona + "|" + objective + "|" + std::to_string(previous.size()) +
                          "|" + title);

  std::vector<std::pair<Action, ElementLine>> candidates;
  for (const auto& e : elements) {
    if (e.role == "textbox") {
      const auto text = words.empty() ? std::string("hello") : words[seed % words.size()];
      candidates.push_back({Action::type(e.id, text), e});
    } else if (e.role == "button" || e.role == "link") {
      candidates.push_back({Action::click(e.id), e});
    } else if (e.role == "combobox") {
      candidates.push_back({Action::select(e.id, "Price: low to high"), e});
    }
  }
  std::vector<std::pair<Action, ElementLine>> fresh;
  for (const auto& c : candidates) {
    if (std::find(previous.begin(), previous.end(), print_action(c.first)) == previous.end()) {
      fresh.push_back(c);
    }
  }
  const auto& pool = fresh.empty() ? candidates : fresh;
  if (pool.empty()) return "Nothing to interact with here.\nANSWER: go_back";
  const auto& [action, el] = pool[seed % pool.size()];
  return "Given who I am, the '" + el.label + "' " + el.role +
         " looks worth trying next.\nANSWER: " + print_action(action);
}

std::string delta_reply(const CompletionRequest& r) {
  const auto before = prompt_section(r.prompt, "BEFORE");
  const auto after = prompt_section(r.prompt, "AFTER");
  Action action;
  try {
    action = parse_action(prompt_section(r.prompt, "ACTION"));
  } catch (const ActionError&) {
    return "ANSWER: The agent did something unrecognizable.";
  }
  if (action.is_stop()) {
    return "ANSWER: The agent stopped with the answer '" + action.payload.value_or("") + "'.";
  }
  if (after.find(kNoOpNotice) != std::string::npos || before == after) {
    return "ANSWER: " + std::string(kNoEffect);
  }
  const auto el = find_element(parse_elements(before), action.target);
  std::string text;
  switch (action.kind) {
    case ActionKind::kType:
      text = "The agent typed '" + *action.payload + "' into " + describe(el, action);
      break;
    case ActionKind::kSelect:
      text = "The agent selected '" + *action.payload + "' in " + describe(el, action);
      break;
    case ActionKind::kGoBack:
      text = "The agent went back";
      break;
    case ActionKind::kHover:
      text = "The agent hovered over " + describe(el, action);
      break;
    case ActionKind::kScroll:
      text = "The agent scrolled " + *action.payload;
      break;
    default:
      text = "The agent clicked " + describe(el, action);
      break;
  }
  const auto before_title = parse_title(before);
  const auto after_title = parse_title(after);
  if (before_title != after_title) {
    text += ", which opened the '" + after_title + "' page.";
  } else {
    text += ", which updated the '" + after_title + "' page.";
  }
  return "ANSWER: " + text;
}

std::string label_reply(const CompletionRequest& r) {
  const auto changes = numbered_items(prompt_section(r.prompt, "STATE CHANGES"));
  static const std::regex kTyped("typed '([^']*)'");
  static const std::regex kOpened("opened the '([^']*)' page");
  static const std::regex kSelected("selected '([^']*)'");
  std::string typed, opened, selected;
  for (const auto& c : changes) {
    std::smatch m;
    if (std::regex_search(c, m, kTyped)) typed = m[1];
    if (std::regex_search(c, m, kOpened)) opened = m[1];
    if (std::regex_search(c, m, kSelected)) selected = m[1];
  }
  if (std::none_of(changes.begin(), changes.end(), is_meaningful)) {
    return "ANSWER: Look around the website without changing anything.";
  }
  std::vector<std::string> parts;
  if (!typed.empty()) parts.push_back("enter '" + typed + "'");
  if (!selected.empty()) parts.push_back("choose '" + selected + "'");
  if (!opened.empty()) parts.push_back("open the '" + opened + "' page");
  if (parts.empty()) parts.push_back("interact with the current page");
  std::string text;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) text += i + 1 == parts.size() ? " and " : ", ";
    text += parts[i];
  }
  text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
  return "ANSWER: " + text + ".";
}

double meaningful_fraction(const std::vector<std::string>& changes) {
  if (changes.empty()) return 0.0;
  const auto n = std::count_if(changes.begin(), changes.end(), is_meaningful);
  return static_cast<double>(n) / static_cast<double>(changes.size());
}

std::string reward_reply(const CompletionRequest& r) {
  const auto changes = numbered_items(prompt_section(r.prompt, "STATE CHANGES"));
  return meaningful_fraction(changes) >= 0.5 ? "The changes fit.\nANSWER: 1"
                                             : "Mostly failed actions.\nANSWER: 0";
}

std::string retro_reply(const CompletionRequest& r) {
  const auto instruction = prompt_section(r.prompt, "INSTRUCTION");
  const auto observation = prompt_section(r.prompt, "OBSERVATION");
  Action action;
  try {
    action = parse_action(prompt_section(r.prompt, "ACTION"));
  } catch (const ActionError&) {
    return "ANSWER: This action moves the task forward.";
  }
  const auto el = find_element(parse_elements(observation), action.target);
  std::string step;
  if (action.kind == ActionKind::kClick && el && lower(el->label).find("search") != std::string::npos) {
    step = "initiate a search by clicking " + describe(el, action);
  } else if (action.kind == ActionKind::kType) {
    step = "type '" + *action.payload + "' into " + describe(el, action);
  } else if (action.is_stop()) {
    step = "stop, since the instruction has been carried out";
  } else {
    step = std::string(to_string(action.kind)) + " " + describe(el, action);
  }
  return "ANSWER: To accomplish \"" + instruction + "\", the next step is to " + step + ".";
}

std::string stop_reply(const CompletionRequest& r) {
  const auto instruction = lower(prompt_section(r.prompt, "INSTRUCTION"));
  const auto changes = numbered_items(prompt_section(r.prompt, "STATE CHANGES"));
  static constexpr std::array<std::string_view, 6> kQuestions{
      "find", "what", "report", "tell", "look up", "check"};
  const bool asks = std::any_of(kQuestions.begin(), kQuestions.end(), [&](auto q) {
    return instruction.rfind(q, 0) == 0;
  });
  if (!asks) return "The instruction only asks for navigation.\nANSWER:";
  static const std::regex kQuoted("'([^']*)'");
  std::string answer;
  for (const auto& c : changes) {
    for (std::sregex_iterator it(c.begin(), c.end(), kQuoted), end; it != end; ++it) {
      answer = (*it)[1];
    }
  }
  return "The instruction asks for information shown on the last page.\nANSWER: " + answer;
}

std::string judge_reply(const CompletionRequest& r) {
  const auto changes = numbered_items(prompt_section(r.prompt, "STATE CHANGES"));
  const int grade = 1 + static_cast<int>(4.0 * meaningful_fraction(changes) + 0.5);
  return "ANSWER: " + std::to_string(grade);
}

MockTransport::Rule rule(Role role, std::string (*fn)(const CompletionRequest&)) {
  return {role, [fn](const CompletionRequest& r) -> std::optional<std::string> { return fn(r); }};
}

}  // namespace

std::string prompt_section(std::string_view prompt, std::string_view name) {
  const std::string header = "## " + std::string(name) + "\n";
  auto start = prompt.find(header);
  if (start == std::string_view::npos) return {};
  start += header.size();
  auto end = prompt.find("\n## ", start);
  if (end == std::string_view::npos) end = prompt.size();
  return trim_copy(prompt.substr(start, end - start));
}

std::vector<ElementLine> parse_elements(std::string_view observation) {
  static const std::regex kLine(R"(^\[([^\]]+)\] (\S+) '(.*)'$)");
  std::vector<ElementLine> out;
  std::istringstream in{std::string(observation)};
  std::string line;
  while (std::getline(in, line)) {
    std::smatch m;
    if (std::regex_match(line, m, kLine)) out.push_back({m[1], m[2], m[3]});
  }
  return out;
}

std::string parse_title(std::string_view observation) {
  static const std::regex kTitle(R"(^RootWebArea '(.*)'$)");
  std::istringstream in{std::string(observation)};
  std::string line;
  while (std::getline(in, line)) {
    std::smatch m;
    if (std::regex_match(line, m, kTitle)) return m[1];
  }
  return {};
}

std::vector<MockTransport::Rule> heuristic_rules() {
  return {
      rule(Role::kExplore, explore_reply),      rule(Role::kDelta, delta_reply),
      rule(Role::kLabel, label_reply),          rule(Role::kBinaryReward, reward_reply),
      rule(Role::kRetroReason, retro_reply),    rule(Role::kStopAppend, stop_reply),
      rule(Role::kGradedJudge, judge_reply),
  };
}

std::vector<MockTransport::Rule> load_mock_rules(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mock rules " + path.string());
  std::vector<MockTransport::Rule> rules;
  try {
    for (const auto& j : Json::parse(in)) {
      const auto name = j.at("role").get<std::string>();
      const auto role = role_from_string(name);
      if (!role) throw ConfigError(path.string() + ": unknown role '" + name + "'");
      auto reply = j.at("reply").get<std::string>();
      if (j.contains("contains")) {
        rules.push_back(MockTransport::when_contains(*role, j.at("contains").get<std::string>(),
                                                     std::move(reply)));
      } else {
        rules.push_back(MockTransport::always(*role, std::move(reply)));
      }
    }
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return rules;
}

}  // namespace retrolabel
