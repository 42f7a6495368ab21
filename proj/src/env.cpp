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

#include "retrolabel/env.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "retrolabel/error.hpp"

#ifndef RETROLABEL_DATA_DIR
#define RETROLABEL_DATA_DIR "data"
#endif

namespace retrolabel {
namespace {

struct RenderedElement {
  std::string id;
  std::string role;
  std::string label;
};

std::string interpolate(const std::string& text, const EnvState& state,
                        const std::optional<std::string>& payload = std::nullopt) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto open = text.find('{', i);
    if (open == std::string::npos) break;
    const auto close = text.find('}', open);
    if (close == std::string::npos) break;
    out.append(text, i, open - i);
    const auto name = text.substr(open + 1, close - open - 1);
    if (name == "payload") {
      out += payload.value_or("");
    } else if (name.size() > 6 && name.ends_with(".count")) {
      auto it = state.lists.find(name.substr(0, name.size() - 6));
      out += std::to_string(it == state.lists.end() ? 0 : it->second.size());
    } else if (auto it = state.slots.find(name); it != state.slots.end()) {
      out += it->second;
    }
    i = close + 1;
  }
  out.append(text, i, std::string::npos);
  return out;
}

std::vector<RenderedElement> rendered_elements(const SiteDefinition& site,
                                               const EnvState& state) {
  std::vector<RenderedElement> out;
  const auto& page = site.pages.at(state.page);
  for (const auto& el : page.elements) {
    if (el.for_each) {
      auto it = state.lists.find(*el.for_each);
      if (it == state.lists.end()) continue;
      for (std::size_t i = 0; i < it->second.size(); ++i) {
        out.push_back({el.id + std::to_string(i + 1), el.role, it->second[i]});
      }
    } else {
      out.push_back({el.id, el.role, interpolate(el.label, state)});
    }
  }
  return out;
}

Effect::Op effect_op(const std::string& name) {
  if (name == "set") return Effect::Op::kSet;
  if (name == "append") return Effect::Op::kAppend;
  if (name == "remove") return Effect::Op::kRemove;
  if (name == "clear") return Effect::Op::kClear;
  throw ConfigError("unknown effect op '" + name + "'");
}

Predicate predicate_from_json(const Json& j) {
  if (!j.is_object() || j.size() != 1) {
    throw ConfigError("predicate must be an object with exactly one key");
  }
  const auto& [key, arg] = *j.items().begin();
  Predicate p;
  auto slot_value = [&](Predicate::Kind kind) {
    p.kind = kind;
    p.slot = arg.at("slot").get<std::string>();
    p.value = arg.at("value").get<std::string>();
  };
  if (key == "page_is") {
    p.kind = Predicate::Kind::kPageIs;
    p.value = arg.get<std::string>();
  } else if (key == "slot_equals") {
    slot_value(Predicate::Kind::kSlotEquals);
  } else if (key == "list_contains") {
    slot_value(Predicate::Kind::kListContains);
  } else if (key == "list_empty") {
    p.kind = Predicate::Kind::kListEmpty;
    p.slot = arg.get<std::string>();
  } else if (key == "answer_equals") {
    p.kind = Predicate::Kind::kAnswerEquals;
    p.value = arg.get<std::string>();
  } else if (key == "answer_contains") {
    p.kind = Predicate::Kind::kAnswerContains;
    p.value = arg.get<std::string>();
  } else {
    throw ConfigError("unknown predicate '" + key + "'");
  }
  return p;
}

bool holds(const Predicate& p, const EnvState& state, const std::string& answer) {
  switch (p.kind) {
    case Predicate::Kind::kPageIs:
      return state.page == p.value;
    case Predicate::Kind::kSlotEquals: {
      auto it = state.slots.find(p.slot);
      return it != state.slots.end() && it->second == p.value;
    }
    case Predicate::Kind::kListContains: {
      auto it = state.lists.find(p.slot);
      return it != state.lists.end() &&
             std::find(it->second.begin(), it->second.end(), p.value) != it->second.end();
    }
    case Predicate::Kind::kListEmpty: {
      auto it = state.lists.find(p.slot);
      return it == state.lists.end() || it->second.empty();
    }
    case Predicate::Kind::kAnswerEquals:
      return answer == p.value;
    case Predicate::Kind::kAnswerContains:
      return answer.find(p.value) != std::string::npos;
  }
  return false;
}

}  // namespace

void check_site(const SiteDefinition& site) {
  if (site.pages.find(site.initial_page) == site.pages.end()) {
    throw ConfigError("site '" + site.name + "': initial page '" +
                      site.initial_page + "' does not exist");
  }
  for (const auto& [id, page] : site.pages) {
    std::set<std::string> seen;
    for (const auto& el : page.elements) {
      if (!is_valid_element_id(el.id)) {
        throw ConfigError("page '" + id + "': invalid element id '" + el.id + "'");
      }
      if (!seen.insert(el.id).second) {
        throw ConfigError("page '" + id + "': duplicate element id '" + el.id + "'");
      }
    }
  }
  for (const auto& t : site.transitions) {
    if (t.page != "*" && site.pages.find(t.page) == site.pages.end()) {
      throw ConfigError("transition from unknown page '" + t.page + "'");
    }
    if (t.next && site.pages.find(*t.next) == site.pages.end()) {
      throw ConfigError("transition to unknown page '" + *t.next + "'");
    }
  }
  std::set<std::string> task_ids;
  for (const auto& task : site.tasks) {
    if (!task_ids.insert(task.id).second) {
      throw ConfigError("duplicate task id '" + task.id + "'");
    }
  }
}

SiteDefinition site_from_json(const Json& j) {
  SiteDefinition site;
  try {
    site.name = j.value("name", std::string{});
    site.initial_page = j.value("initial_page", std::string{});
    for (const auto& [id, pj] : j.at("pages").items()) {
      PageSpec page;
      page.title = pj.value("title", id);
      page.url = pj.value("url", std::string{});
      for (const auto& ej : pj.value("elements", Json::array())) {
        ElementSpec el;
        el.role = ej.at("role").get<std::string>();
        if (ej.contains("for_each")) {
          el.for_each = ej.at("for_each").get<std::string>();
          el.id = ej.at("id_prefix").get<std::string>();
        } else {
          el.id = ej.at("id").get<std::string>();
          el.label = ej.value("label", std::string{});
        }
        page.elements.push_back(std::move(el));
      }
      site.pages.emplace(id, std::move(page));
    }
    for (const auto& tj : j.value("transitions", Json::array())) {
      Transition t;
      t.page = tj.at("page").get<std::string>();
      const auto kind_name = tj.at("kind").get<std::string>();
      auto kind = action_kind_from_string(kind_name);
      if (!kind) throw ConfigError("unknown action kind '" + kind_name + "'");
      t.kind = *kind;
      if (tj.contains("target")) t.target = tj.at("target").get<std::string>();
      if (tj.contains("payload")) t.payload = tj.at("payload").get<std::string>();
      if (tj.contains("next")) t.next = tj.at("next").get<std::string>();
      for (const auto& ej : tj.value("effects", Json::array())) {
        t.effects.push_back({effect_op(ej.at("op").get<std::string>()),
                             ej.at("slot").get<std::string>(),
                             ej.value("value", std::string{})});
      }
      site.transitions.push_back(std::move(t));
    }
    for (const auto& kj : j.value("tasks", Json::array())) {
      TaskSpec task;
      task.id = kj.at("id").get<std::string>();
      task.description = kj.value("description", std::string{});
      for (const auto& pj : kj.at("require")) task.require.push_back(predicate_from_json(pj));
      site.tasks.push_back(std::move(task));
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed site definition: ") + e.what());
  }
  check_site(site);
  return site;
}

SiteDefinition load_site(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open site definition " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return site_from_json(j);
}

std::string render_observation(const SiteDefinition& site, const EnvState& state) {
  const auto& page = site.pages.at(state.page);
  std::string out = "RootWebArea '" + interpolate(page.title, state) + "'";
  for (const auto& el : rendered_elements(site, state)) {
    out += "\n[" + el.id + "] " + el.role + " '" + el.label + "'";
  }
  return out;
}

int check_task(const SiteDefinition& site, const std::string& task_id,
               const EnvState& final_state, const std::string& answer) {
  auto it = std::find_if(site.tasks.begin(), site.tasks.end(),
                         [&](const TaskSpec& t) { return t.id == task_id; });
  if (it == site.tasks.end()) {
    throw LookupError("site '" + site.name + "' has no task '" + task_id + "'");
  }
  return std::all_of(it->require.begin(), it->require.end(),
                     [&](const Predicate& p) { return holds(p, final_state, answer); })
             ? 1
             : 0;
}

FixtureEnvironment::FixtureEnvironment(std::shared_ptr<const SiteDefinition> site)
    : site_(std::move(site)) {
  if (!site_) throw ConfigError("null site definition");
}

Observation FixtureEnvironment::reset(std::uint64_t /*seed*/) {
  // Fixture dynamics are fully deterministic; the seed only exists so the
  // interface matches environments that do randomize.
  check_site(*site_);
  state_ = EnvState{};
  state_.page = site_->initial_page;
  live_ = true;
  return observe(render());
}

std::string FixtureEnvironment::render() const {
  return render_observation(*site_, state_);
}

Observation FixtureEnvironment::observe(std::string text) const {
  const auto& page = site_->pages.at(state_.page);
  std::optional<std::string> url;
  if (!page.url.empty()) url = page.url;
  return {std::move(text), std::move(url), state_.action_counter};
}

const Transition* FixtureEnvironment::match(const Action& action) const {
  const auto elements = rendered_elements(*site_, state_);
  for (const auto& t : site_->transitions) {
    if (t.page != "*" && t.page != state_.page) continue;
    if (t.kind != action.kind) continue;
    if (t.target) {
      if (t.target != action.target) continue;
      const bool present = std::any_of(elements.begin(), elements.end(),
                                       [&](const RenderedElement& e) { return e.id == *t.target; });
      if (!present) continue;
    }
    if (t.payload && t.payload != action.payload) continue;
    return &t;
  }
  return nullptr;
}

void FixtureEnvironment::apply(const Transition& transition, const Action& action) {
  for (const auto& effect : transition.effects) {
    const auto value = interpolate(effect.value, state_, action.payload);
    switch (effect.op) {
      case Effect::Op::kSet:
        state_.slots[effect.slot] = value;
        break;
      case Effect::Op::kAppend:
        state_.lists[effect.slot].push_back(value);
        break;
      case Effect::Op::kRemove: {
        auto& list = state_.lists[effect.slot];
        if (auto it = std::find(list.begin(), list.end(), value); it != list.end()) {
          list.erase(it);
        }
        break;
      }
      case Effect::Op::kClear:
        state_.slots.erase(effect.slot);
        state_.lists.erase(effect.slot);
        break;
    }
  }
  if (transition.next && *transition.next != state_.page) {
    state_.history.push_back(state_.page);
    state_.page = *transition.next;
  }
}

StepResult FixtureEnvironment::step(const Action& action) {
  if (!live_) throw LifecycleError("step before reset");
  if (state_.terminal) throw LifecycleError("step after terminal stop action");
  if (auto v = action_violation(action); !v.empty()) throw ActionError(v);

  StepResult result;
  if (action.is_stop()) {
    ++state_.action_counter;
    state_.terminal = true;
    state_.answer = action.payload.value_or("");
    result.terminal = true;
    result.answer = state_.answer;
    result.observation = observe(render());
    return result;
  }

  bool changed = false;
  if (action.kind == ActionKind::kGoBack) {
    if (!state_.history.empty()) {
      state_.page = state_.history.back();
      state_.history.pop_back();
      changed = true;
    }
  } else if (const auto* t = match(action)) {
    apply(*t, action);
    changed = true;
  }
  ++state_.action_counter;
  auto text = render();
  if (!changed) {
    text += "\n";
    text += kNoOpNotice;
    result.no_op = true;
  }
  result.observation = observe(std::move(text));
  return result;
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("RETROLABEL_DATA_DIR"); env && *env) return env;
  return RETROLABEL_DATA_DIR;
}

std::shared_ptr<const SiteDefinition> load_fixture(const std::string& name,
                                                   const std::filesystem::path& data_dir) {
  return std::make_shared<const SiteDefinition>(load_site(data_dir / "sites" / (name + ".json")));
}

std::vector<Persona> load_personas(const std::string& site,
                                   const std::filesystem::path& data_dir) {
  const auto path = data_dir / "personas" / (site + ".json");
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open persona roster " + path.string());
  std::vector<Persona> out;
  try {
    for (const auto& pj : Json::parse(in)) {
      auto p = persona_from_json(pj);
      if (p.name.empty() || p.description.empty()) {
        throw ConfigError(path.string() + ": persona fields must be non-empty");
      }
      out.push_back(std::move(p));
    }
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace retrolabel
