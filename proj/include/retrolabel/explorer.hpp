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

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "retrolabel/env.hpp"
#include "retrolabel/error.hpp"
#include "retrolabel/roles.hpp"
#include "retrolabel/trajectory.hpp"

namespace retrolabel {

struct ExploreConfig {
  std::size_t t_max = 40;
  std::size_t prune_interval = 4;
  bool final_check = true;
  std::size_t episodes_per_site = 50;
  /// Roster used for sites that do not bring their own.
  std::vector<Persona> personas;
  /// Number of roster entries used per site (0: all).
  std::size_t persona_types = 16;
  std::uint64_t seed = 0;
  std::size_t parallelism = 1;
  /// Keep only the longest of an episode's nested demonstrations.
  bool dedup_longest = false;

  /// Throws ConfigError when an invariant is broken.
  void check() const;

  static ExploreConfig webarena_profile();
  static ExploreConfig miniwob_profile();
};

enum class HaltReason { kPruned, kTMax, kEnvTerminal, kRoleError };

std::string_view to_string(HaltReason reason);
HaltReason halt_reason_from_string(std::string_view name);

struct CheckpointRecord {
  std::size_t length = 0;
  Instruction instruction;
  int reward = 0;

  bool operator==(const CheckpointRecord&) const = default;
};

struct EpisodeLog {
  std::string episode_id;
  std::string site;
  std::optional<Persona> persona;
  std::size_t actions_taken = 0;
  std::vector<CheckpointRecord> checkpoints;
  HaltReason halt_reason = HaltReason::kTMax;
  std::string error;
  std::size_t summarizer_calls = 0;
  std::size_t parse_failures = 0;

  Json to_json() const;
  static EpisodeLog from_json(const Json& j);

  bool operator==(const EpisodeLog&) const = default;
};

/// Raised when a role fails inside a checkpoint; names the prefix length.
class CheckpointError : public RoleError {
 public:
  CheckpointError(std::size_t length, const std::string& what, bool transport)
      : RoleError("checkpoint at " + std::to_string(length) + " actions: " + what),
        length_(length),
        transport_(transport) {}
  std::size_t length() const { return length_; }
  bool transport_failure() const { return transport_; }

 private:
  std::size_t length_;
  bool transport_;
};

/// Per-episode cache of state-change summaries; each transition is
/// summarized at most once however many checkpoints cover it.
class DeltaCache {
 public:
  /// Summaries for every transition of `trajectory`, computing missing ones.
  std::span<const StateChangeSummary> extend(const Trajectory& trajectory, const LmRoles& roles,
                                             CallScope& scope);
  std::size_t calls() const { return calls_; }

 private:
  std::vector<StateChangeSummary> summaries_;
  std::size_t calls_ = 0;
};

struct CheckpointResult {
  Instruction instruction;
  int reward = 0;
  std::vector<StateChangeSummary> deltas;
};

/// Summarizes the full prefix, labels it, and scores the label against it.
CheckpointResult run_checkpoint(const LmRoles& roles, const Trajectory& prefix, DeltaCache& cache,
                                CallScope& scope);

struct EpisodeSpec {
  std::string site;
  std::string episode_id;
  Persona persona;
  std::uint64_t reset_seed = 0;
};

struct EpisodeResult {
  std::vector<Demonstration> demonstrations;
  EpisodeLog log;
};

/// One exploration episode with checkpoints after every prune_interval
/// completed actions, plus an optional final check at the end of the
/// episode. A failing checkpoint halts the episode immediately.
EpisodeResult run_episode(Environment& env, const LmRoles& roles, const ExploreConfig& config,
                          const EpisodeSpec& spec);

struct SiteSpec {
  std::string name;
  std::function<std::unique_ptr<Environment>()> make_environment;
  std::vector<Persona> personas;  // empty: use ExploreConfig::personas
};

struct CampaignResult {
  std::vector<Demonstration> demonstrations;
  std::vector<EpisodeLog> logs;
};

/// `<site>-NNNN`
std::string episode_id_for(const std::string& site, std::size_t index);

/// Episode plan of a campaign: personas rotate round-robin over the roster
/// from a seed-derived offset.
std::vector<EpisodeSpec> plan_campaign(std::span<const SiteSpec> sites, const ExploreConfig& config);

/// Runs every planned episode on a bounded worker pool. Output is ordered by
/// (site, episode id, checkpoint length) whatever the scheduling.
CampaignResult run_campaign(std::span<const SiteSpec> sites, const ExploreConfig& config,
                            const LmRoles& roles);

struct SavingsBucket {
  std::size_t halt_length = 0;
  std::size_t episodes = 0;
  double fraction = 0.0;
  std::size_t prevented_per_episode = 0;
};

struct SavingsReport {
  std::size_t episodes = 0;
  std::size_t t_max = 0;
  std::vector<SavingsBucket> buckets;  // ascending halt length
  std::uint64_t prevented_actions = 0;
  std::uint64_t possible_actions = 0;
  /// prevented_actions / possible_actions
  double prevented_fraction = 0.0;

  Json to_json() const;
};

SavingsReport compute_savings(std::span<const EpisodeLog> logs, std::size_t t_max);

void write_demonstrations(const std::filesystem::path& path, std::span<const Demonstration> demos);
std::vector<Demonstration> read_demonstrations(const std::filesystem::path& path);
void write_episode_logs(const std::filesystem::path& path, std::span<const EpisodeLog> logs);
std::vector<EpisodeLog> read_episode_logs(const std::filesystem::path& path);

}  // namespace retrolabel
