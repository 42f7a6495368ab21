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

#include "retrolabel/explorer.hpp"

#include <algorithm>
#include <cstdio>
#include <tuple>

#include "retrolabel/error.hpp"
#include "retrolabel/jsonl.hpp"
#include "retrolabel/parallel.hpp"

namespace retrolabel {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

void ExploreConfig::check() const {
  if (t_max < 1) throw ConfigError("explore.t_max must be >= 1");
  if (prune_interval < 1) throw ConfigError("explore.prune_interval must be >= 1");
  if (episodes_per_site < 1) throw ConfigError("explore.episodes_per_site must be >= 1");
  if (parallelism < 1) throw ConfigError("explore.parallelism must be >= 1");
}

ExploreConfig ExploreConfig::webarena_profile() {
  ExploreConfig c;
  c.t_max = 40;
  c.prune_interval = 4;
  c.episodes_per_site = 50;
  c.persona_types = 16;
  return c;
}

ExploreConfig ExploreConfig::miniwob_profile() {
  ExploreConfig c;
  c.t_max = 20;
  c.prune_interval = 4;
  c.episodes_per_site = 80;
  c.persona_types = 10;
  return c;
}

std::string_view to_string(HaltReason reason) {
  switch (reason) {
    case HaltReason::kPruned:
      return "pruned";
    case HaltReason::kTMax:
      return "t_max";
    case HaltReason::kEnvTerminal:
      return "env_terminal";
    case HaltReason::kRoleError:
      return "role_error";
  }
  return "";
}

HaltReason halt_reason_from_string(std::string_view name) {
  for (auto r : {HaltReason::kPruned, HaltReason::kTMax, HaltReason::kEnvTerminal,
                 HaltReason::kRoleError}) {
    if (to_string(r) == name) return r;
  }
  throw ParseError("unknown halt reason '" + std::string(name) + "'");
}

Json EpisodeLog::to_json() const {
  Json cps = Json::array();
  for (const auto& c : checkpoints) {
    cps.push_back({{"length", c.length},
                   {"instruction", retrolabel::to_json(c.instruction)},
                   {"reward", c.reward}});
  }
  Json j{{"episode_id", episode_id},
         {"site", site},
         {"actions_taken", actions_taken},
         {"checkpoints", std::move(cps)},
         {"halt_reason", retrolabel::to_string(halt_reason)},
         {"error", error},
         {"summarizer_calls", summarizer_calls},
         {"parse_failures", parse_failures}};
  j["persona"] = persona ? retrolabel::to_json(*persona) : Json(nullptr);
  return j;
}

EpisodeLog EpisodeLog::from_json(const Json& j) {
  EpisodeLog log;
  log.episode_id = j.at("episode_id").get<std::string>();
  log.site = j.value("site", std::string{});
  if (auto it = j.find("persona"); it != j.end() && !it->is_null()) {
    log.persona = persona_from_json(*it);
  }
  log.actions_taken = j.at("actions_taken").get<std::size_t>();
  for (const auto& c : j.at("checkpoints")) {
    log.checkpoints.push_back({c.at("length").get<std::size_t>(),
                               instruction_from_json(c.at("instruction")),
                               c.at("reward").get<int>()});
  }
  log.halt_reason = halt_reason_from_string(j.at("halt_reason").get<std::string>());
  log.error = j.value("error", std::string{});
  log.summarizer_calls = j.value("summarizer_calls", std::size_t{0});
  log.parse_failures = j.value("parse_failures", std::size_t{0});
  return log;
}

std::span<const StateChangeSummary> DeltaCache::extend(const Trajectory& trajectory,
                                                       const LmRoles& roles, CallScope& scope) {
  if (trajectory.length() < summaries_.size()) {
    throw PreconditionError("delta cache: trajectory shrank");
  }
  for (std::size_t i = summaries_.size(); i < trajectory.length(); ++i) {
    summaries_.push_back(roles.summarize_change(trajectory.steps[i].observation,
                                                trajectory.steps[i].action,
                                                trajectory.observation_at(i + 1), i, scope));
    ++calls_;
  }
  return {summaries_.data(), trajectory.length()};
}

CheckpointResult run_checkpoint(const LmRoles& roles, const Trajectory& prefix, DeltaCache& cache,
                                CallScope& scope) {
  if (prefix.length() < 1) throw PreconditionError("checkpoint needs at least one action");
  try {
    const auto deltas = cache.extend(prefix, roles, scope);
    auto instruction = roles.label_trajectory(deltas, scope);
    const int reward = roles.score_binary(instruction, deltas, scope);
    return {std::move(instruction), reward, {deltas.begin(), deltas.end()}};
  } catch (const TransportError& e) {
    throw CheckpointError(prefix.length(), e.what(), true);
  } catch (const CheckpointError&) {
    throw;
  } catch (const Error& e) {
    throw CheckpointError(prefix.length(), e.what(), false);
  }
}

EpisodeResult run_episode(Environment& env, const LmRoles& roles, const ExploreConfig& config,
                          const EpisodeSpec& spec) {
  config.check();
  EpisodeResult result;
  auto& log = result.log;
  log.episode_id = spec.episode_id;
  log.site = spec.site;
  log.persona = spec.persona;
  log.halt_reason = HaltReason::kTMax;

  Trajectory tau;
  tau.episode_id = spec.episode_id;
  tau.persona = spec.persona;
  tau.final_observation = env.reset(spec.reset_seed);

  CallScope scope(spec.site + "/" + spec.episode_id);
  DeltaCache cache;
  std::vector<Action> actions;
  std::size_t last_checkpoint = 0;

  // Returns whether the checkpoint passed; a pass emits a demonstration.
  auto checkpoint = [&]() {
    last_checkpoint = tau.length();
    auto outcome = run_checkpoint(roles, tau, cache, scope);
    log.checkpoints.push_back({tau.length(), outcome.instruction, outcome.reward});
    if (outcome.reward < 1) return false;
    Demonstration demo;
    demo.instruction = std::move(outcome.instruction);
    demo.trajectory = tau;
    demo.binary_reward = 1;
    demo.checkpoint_length = tau.length();
    demo.episode_id = spec.episode_id;
    demo.site = spec.site;
    demo.persona = spec.persona;
    for (const auto& d : outcome.deltas) demo.state_changes.push_back(d.text);
    result.demonstrations.push_back(std::move(demo));
    return true;
  };

  try {
    bool pruned = false;
    while (tau.length() < config.t_max) {
      auto decision = roles.explore_action(tau.final_observation, spec.persona, actions, scope);
      if (decision.parse_failure) ++log.parse_failures;
      const auto step = env.step(decision.action);

      Step s;
      s.observation = tau.final_observation;
      s.action = decision.action;
      if (!decision.reasoning.empty()) s.exploration_reasoning = std::move(decision.reasoning);
      tau.steps.push_back(std::move(s));
      tau.final_observation = step.observation;
      actions.push_back(decision.action);

      if (tau.length() % config.prune_interval == 0 && !checkpoint()) {
        pruned = true;
        break;
      }
      if (step.terminal) {
        log.halt_reason = HaltReason::kEnvTerminal;
        break;
      }
    }
    if (pruned) {
      log.halt_reason = HaltReason::kPruned;
    } else if (config.final_check && tau.length() > last_checkpoint && !checkpoint()) {
      log.halt_reason = HaltReason::kPruned;
    }
  } catch (const Error& e) {
    log.halt_reason = HaltReason::kRoleError;
    log.error = e.what();
  }
  log.actions_taken = tau.length();
  log.summarizer_calls = cache.calls();

  if (config.dedup_longest && result.demonstrations.size() > 1) {
    result.demonstrations.erase(result.demonstrations.begin(),
                                result.demonstrations.end() - 1);
  }
  return result;
}

std::string episode_id_for(const std::string& site, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", index);
  return site + "-" + buf;
}

std::vector<EpisodeSpec> plan_campaign(std::span<const SiteSpec> sites,
                                       const ExploreConfig& config) {
  config.check();
  std::vector<EpisodeSpec> plan;
  for (const auto& site : sites) {
    auto roster = site.personas.empty() ? config.personas : site.personas;
    if (config.persona_types > 0 && roster.size() > config.persona_types) {
      roster.resize(config.persona_types);
    }
    if (roster.empty()) throw ConfigError("site '" + site.name + "' has no personas");
    const auto offset = splitmix64(config.seed ^ fnv1a(site.name)) % roster.size();
    for (std::size_t i = 0; i < config.episodes_per_site; ++i) {
      plan.push_back({site.name, episode_id_for(site.name, i), roster[(offset + i) % roster.size()],
                      splitmix64(config.seed + i)});
    }
  }
  return plan;
}

CampaignResult run_campaign(std::span<const SiteSpec> sites, const ExploreConfig& config,
                            const LmRoles& roles) {
  const auto plan = plan_campaign(sites, config);
  std::vector<EpisodeResult> results(plan.size());

  parallel_for(plan.size(), config.parallelism, [&](std::size_t i) {
    const auto& spec = plan[i];
    const auto& site = *std::find_if(sites.begin(), sites.end(),
                                     [&](const SiteSpec& s) { return s.name == spec.site; });
    try {
      auto env = site.make_environment();
      results[i] = run_episode(*env, roles, config, spec);
    } catch (const std::exception& e) {
      auto& log = results[i].log;
      log.episode_id = spec.episode_id;
      log.site = spec.site;
      log.persona = spec.persona;
      log.halt_reason = HaltReason::kRoleError;
      log.error = std::string("environment: ") + e.what();
    }
  });

  std::vector<std::size_t> order(plan.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(plan[a].site, plan[a].episode_id) < std::tie(plan[b].site, plan[b].episode_id);
  });

  CampaignResult out;
  for (auto i : order) {
    for (auto& d : results[i].demonstrations) out.demonstrations.push_back(std::move(d));
    out.logs.push_back(std::move(results[i].log));
  }
  return out;
}

Json SavingsReport::to_json() const {
  Json buckets_json = Json::array();
  for (const auto& b : buckets) {
    buckets_json.push_back({{"halt_length", b.halt_length},
                            {"episodes", b.episodes},
                            {"fraction", b.fraction},
                            {"prevented_per_episode", b.prevented_per_episode}});
  }
  return {{"episodes", episodes},
          {"t_max", t_max},
          {"buckets", std::move(buckets_json)},
          {"prevented_actions", prevented_actions},
          {"possible_actions", possible_actions},
          {"prevented_fraction", prevented_fraction}};
}

SavingsReport compute_savings(std::span<const EpisodeLog> logs, std::size_t t_max) {
  if (logs.empty()) throw PreconditionError("compute_savings: no episode logs");
  if (t_max < 1) throw PreconditionError("compute_savings: t_max must be >= 1");
  std::map<std::size_t, std::size_t> counts;
  for (const auto& log : logs) {
    if (log.actions_taken > t_max) {
      throw PreconditionError("episode " + log.episode_id + " took " +
                              std::to_string(log.actions_taken) + " actions, above t_max");
    }
    ++counts[log.actions_taken];
  }
  SavingsReport report;
  report.episodes = logs.size();
  report.t_max = t_max;
  for (const auto& [length, n] : counts) {
    report.buckets.push_back({length, n, static_cast<double>(n) / static_cast<double>(logs.size()),
                              t_max - length});
    report.prevented_actions += static_cast<std::uint64_t>(n) * (t_max - length);
  }
  report.possible_actions = static_cast<std::uint64_t>(logs.size()) * t_max;
  report.prevented_fraction = static_cast<double>(report.prevented_actions) /
                              static_cast<double>(report.possible_actions);
  return report;
}

void write_demonstrations(const std::filesystem::path& path, std::span<const Demonstration> demos) {
  write_jsonl(path, demos, [](const Demonstration& d) { return to_json(d); });
}

std::vector<Demonstration> read_demonstrations(const std::filesystem::path& path) {
  return read_jsonl<Demonstration>(path, [](const Json& j) {
    if (j.value("schema_version", 0) != kDemonstrationSchemaVersion) {
      throw ParseError("not a raw demonstration record (schema_version " +
                       std::to_string(j.value("schema_version", 0)) + ")");
    }
    return demonstration_from_json(j);
  });
}

void write_episode_logs(const std::filesystem::path& path, std::span<const EpisodeLog> logs) {
  write_jsonl(path, logs, [](const EpisodeLog& l) { return l.to_json(); });
}

std::vector<EpisodeLog> read_episode_logs(const std::filesystem::path& path) {
  return read_jsonl<EpisodeLog>(path, [](const Json& j) { return EpisodeLog::from_json(j); });
}

}  // namespace retrolabel
