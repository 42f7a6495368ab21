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

#include "retrolabel/cli.hpp"

#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "retrolabel/bridge.hpp"
#include "retrolabel/config.hpp"
#include "retrolabel/env.hpp"
#include "retrolabel/error.hpp"
#include "retrolabel/evaluator.hpp"
#include "retrolabel/explorer.hpp"
#include "retrolabel/exporter.hpp"
#include "retrolabel/jsonl.hpp"
#include "retrolabel/mock_lm.hpp"
#include "retrolabel/parallel.hpp"
#include "retrolabel/posthoc.hpp"
#include "retrolabel/roles.hpp"
#include "retrolabel/transport.hpp"

namespace retrolabel {
namespace {

namespace fs = std::filesystem;

constexpr const char* kDemosFile = "demonstrations.jsonl";
constexpr const char* kEpisodesFile = "episodes.jsonl";
constexpr const char* kSavingsFile = "savings.json";
constexpr const char* kAnnotatedFile = "annotated.jsonl";
constexpr const char* kAnnotateFailuresFile = "annotate_failures.jsonl";
constexpr const char* kSftFile = "sft.jsonl";
constexpr const char* kStatsJsonFile = "stats.json";
constexpr const char* kStatsCsvFile = "stats.csv";
constexpr const char* kEvalRecordsFile = "eval_records.jsonl";
constexpr const char* kDemoEvalRecordsFile = "demo_eval_records.jsonl";
constexpr const char* kEvalFailuresFile = "eval_failures.jsonl";
constexpr const char* kEvalSummaryFile = "eval_summary.json";

enum class Stage { kCollect, kAnnotate, kEvaluate };

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::kCollect: return "collect";
    case Stage::kAnnotate: return "annotate";
    case Stage::kEvaluate: return "evaluate";
  }
  return "?";
}

std::string role_log_name(Stage s) {
  return s == Stage::kCollect ? "role_log.jsonl" : std::string(stage_name(s)) + "_role_log.jsonl";
}

std::string config_record_name(Stage s) { return std::string(stage_name(s)) + ".config.toml"; }

Stage stage_from_string(std::string_view name) {
  if (name == "collect") return Stage::kCollect;
  if (name == "annotate") return Stage::kAnnotate;
  if (name == "evaluate") return Stage::kEvaluate;
  throw ConfigError("unknown stage '" + std::string(name) + "' (expected collect, annotate or evaluate)");
}

Stage stage_for_log(const fs::path& log) {
  const auto name = log.filename().string();
  for (Stage s : {Stage::kCollect, Stage::kAnnotate, Stage::kEvaluate}) {
    if (name == role_log_name(s)) return s;
  }
  throw ConfigError("cannot tell which stage wrote " + name + "; pass --stage");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Counts transport failures passing through, so a run whose every episode
// died on the transport can report it as such.
class CountingTransport final : public RoleTransport {
 public:
  explicit CountingTransport(RoleTransport& inner)
      : RoleTransport(inner.retry_policy()), inner_(inner) {}
  std::string complete(const CompletionRequest& request) override {
    try {
      return inner_.complete(request);
    } catch (const TransportError&) {
      ++failures_;
      throw;
    }
  }
  TransportMode mode() const override { return inner_.mode(); }
  std::size_t failures() const { return failures_; }

 private:
  RoleTransport& inner_;
  std::atomic<std::size_t> failures_{0};
};

std::unique_ptr<RoleTransport> make_base_transport(const Config& config) {
  const auto& mode = config.get_string("transport.mode");
  if (mode == "mock") {
    std::vector<MockTransport::Rule> rules;
    if (const auto& path = config.get_string("transport.mock_rules"); !path.empty()) {
      rules = load_mock_rules(path);
    }
    auto fallback = heuristic_rules();
    rules.insert(rules.end(), fallback.begin(), fallback.end());
    return std::make_unique<MockTransport>(std::move(rules));
  }
  if (mode == "replay") {
    const auto& path = config.get_string("transport.replay_log");
    if (path.empty()) throw ConfigError("transport.mode=replay needs transport.replay_log");
    return ReplayTransport::from_file(path);
  }
  if (mode == "live") {
    LiveConfig live;
    live.base_url = config.get_string("transport.base_url");
    live.model = config.get_string("transport.model");
    live.temperature = config.get_float("transport.temperature");
    live.timeout = std::chrono::seconds(config.get_size("transport.timeout_seconds"));
    if (const auto& var = config.get_string("transport.api_key_env"); !var.empty()) {
      if (const char* key = std::getenv(var.c_str())) live.api_key = key;
    }
    auto policy = RetryPolicy::for_mode(TransportMode::kLive);
    const auto attempts = config.get_int("transport.max_attempts");
    if (attempts < 1) throw ConfigError("transport.max_attempts must be at least 1");
    policy.max_attempts = static_cast<int>(attempts);
    return std::make_unique<LiveTransport>(std::move(live), policy);
  }
  throw ConfigError("unknown transport.mode '" + mode + "' (expected live, replay or mock)");
}

struct TransportStack {
  explicit TransportStack(std::unique_ptr<RoleTransport> base_transport)
      : base(std::move(base_transport)), counting(*base), logging(counting, log) {}

  std::unique_ptr<RoleTransport> base;
  CountingTransport counting;
  RoleLog log;
  LoggingTransport logging;
};

LmRoles make_roles(const Config& config, RoleTransport& transport) {
  PromptLibrary prompts;
  if (const auto& dir = config.get_string("roles.prompts_dir"); !dir.empty()) {
    if (!fs::is_directory(dir)) throw ConfigError("roles.prompts_dir " + dir + " is not a directory");
    for (Role role : kAllRoles) {
      const auto file = fs::path(dir) / (std::string(to_string(role)) + ".txt");
      if (fs::exists(file)) prompts.set(role, read_text(file));
    }
  }
  RoleOptions options;
  options.observation_budget = config.get_size("roles.observation_budget");
  if (const auto& rubric = config.get_string("roles.rubric_file"); !rubric.empty()) {
    options.rubric = read_text(rubric);
  }
  return LmRoles(transport, std::move(prompts), std::move(options));
}

fs::path data_dir(const Config& config) {
  const auto& dir = config.get_string("run.data_dir");
  return dir.empty() ? default_data_dir() : fs::path(dir);
}

ExploreConfig explore_config(const Config& config) {
  ExploreConfig c;
  c.t_max = config.get_size("explore.t_max");
  c.prune_interval = config.get_size("explore.prune_interval");
  c.final_check = config.get_bool("explore.final_check");
  c.episodes_per_site = config.get_size("explore.episodes_per_site");
  c.persona_types = config.get_size("explore.persona_types");
  c.dedup_longest = config.get_bool("explore.dedup_longest");
  c.seed = static_cast<std::uint64_t>(config.get_int("run.seed"));
  c.parallelism = config.get_size("run.parallelism");
  c.check();
  return c;
}

// Environment factories for every configured site: a fixture by default, or
// an external process / TCP endpoint speaking the bridge protocol.
class SiteRegistry {
 public:
  explicit SiteRegistry(const Config& config) : config_(config), data_dir_(data_dir(config)) {
    const auto& names = config.get_list("sites.names");
    if (names.empty()) throw ConfigError("sites.names is empty");
    const bool bridged = !config.get_list("sites.bridge_command").empty() ||
                         !config.get_string("sites.bridge_address").empty();
    for (const auto& name : names) {
      if (!bridged) fixtures_[name] = load_fixture(name, data_dir_);
    }
  }

  std::unique_ptr<Environment> make(const std::string& site) const {
    if (const auto it = fixtures_.find(site); it != fixtures_.end()) {
      return std::make_unique<FixtureEnvironment>(it->second);
    }
    if (auto argv = config_.get_list("sites.bridge_command"); !argv.empty()) {
      argv.push_back("--site");
      argv.push_back(site);
      return std::make_unique<BridgeEnvironment>(spawn_process_channel(argv));
    }
    const auto& address = config_.get_string("sites.bridge_address");
    if (!address.empty()) {
      const auto colon = address.rfind(':');
      if (colon == std::string::npos) throw ConfigError("sites.bridge_address must be host:port");
      const int port = std::stoi(address.substr(colon + 1));
      if (port <= 0 || port > 65535) throw ConfigError("sites.bridge_address has a bad port");
      return std::make_unique<BridgeEnvironment>(
          connect_tcp(address.substr(0, colon), static_cast<std::uint16_t>(port)));
    }
    throw ConfigError("site '" + site + "' is not configured");
  }

  std::shared_ptr<const SiteDefinition> fixture(const std::string& site) const {
    const auto it = fixtures_.find(site);
    return it == fixtures_.end() ? nullptr : it->second;
  }

  std::vector<SiteSpec> site_specs() const {
    std::vector<SiteSpec> out;
    for (const auto& name : config_.get_list("sites.names")) {
      SiteSpec spec;
      spec.name = name;
      spec.make_environment = [this, name] { return make(name); };
      spec.personas = load_personas(name, data_dir_);
      out.push_back(std::move(spec));
    }
    return out;
  }

 private:
  const Config& config_;
  fs::path data_dir_;
  std::map<std::string, std::shared_ptr<const SiteDefinition>> fixtures_;
};

struct StageResult {
  int exit_code = kExitOk;
  std::vector<std::string> data_files;  // compared by replay
};

StageResult stage_collect(const Config& config, TransportStack& stack, const fs::path&,
                          const std::optional<fs::path>&, const fs::path& out_dir, std::ostream& out) {
  const auto explore = explore_config(config);
  SiteRegistry registry(config);
  const auto sites = registry.site_specs();
  const auto roles = make_roles(config, stack.logging);
  const auto result = run_campaign(sites, explore, roles);

  write_demonstrations(out_dir / kDemosFile, result.demonstrations);
  write_episode_logs(out_dir / kEpisodesFile, result.logs);
  std::size_t failed = 0;
  for (const auto& log : result.logs) failed += log.halt_reason == HaltReason::kRoleError;
  StageResult r{kExitOk, {kDemosFile, kEpisodesFile}};
  if (!result.logs.empty()) {
    write_text(out_dir / kSavingsFile, compute_savings(result.logs, explore.t_max).to_json().dump(2) + "\n");
    r.data_files.push_back(kSavingsFile);
  }
  out << "collect: " << result.logs.size() << " episodes, " << result.demonstrations.size()
      << " demonstrations, " << failed << " episodes ended in errors\n";
  if (!result.logs.empty() && failed == result.logs.size()) {
    out << "collect: every episode failed; first error: " << result.logs.front().error << "\n";
    r.exit_code = stack.counting.failures() > 0 ? kExitTransport : kExitRuntime;
  }
  return r;
}

fs::path input_or(const std::optional<fs::path>& input, const fs::path& dir, const char* name) {
  return input ? *input : dir / name;
}

StageResult stage_annotate(const Config& config, TransportStack& stack, const fs::path& input_dir,
                           const std::optional<fs::path>& input, const fs::path& out_dir,
                           std::ostream& out) {
  const auto demos = read_demonstrations(input_or(input, input_dir, kDemosFile));
  const auto roles = make_roles(config, stack.logging);
  const auto batch = batch_annotate(demos, roles, config.get_size("run.parallelism"));
  write_annotated(out_dir / kAnnotatedFile, batch.annotated);
  write_jsonl(out_dir / kAnnotateFailuresFile, batch.failures,
              [](const AnnotationFailure& f) { return f.to_json(); });
  out << "annotate: " << batch.annotated.size() << " annotated, " << batch.failures.size()
      << " failed\n";
  StageResult r{kExitOk, {kAnnotatedFile, kAnnotateFailuresFile}};
  if (!demos.empty() && batch.annotated.empty()) {
    r.exit_code = stack.counting.failures() > 0 ? kExitTransport : kExitRuntime;
  }
  return r;
}

struct EvalItem {
  std::string site;
  Instruction instruction;
  std::optional<std::string> task;
  std::optional<Demonstration> demo;
};

std::vector<EvalItem> eval_items(const Config& config, const SiteRegistry& registry,
                                 const fs::path& input_dir, const std::optional<fs::path>& input) {
  std::vector<EvalItem> items;
  const auto& source = config.get_string("evaluate.source");
  if (source == "demos") {
    const auto& path = config.get_string("evaluate.demos");
    const auto file = input ? *input : path.empty() ? input_dir / kDemosFile : fs::path(path);
    for (auto& d : read_demonstrations(file)) {
      EvalItem item{d.site, d.instruction, std::nullopt, d};
      items.push_back(std::move(item));
    }
  } else if (source == "tasks") {
    const auto& path = config.get_string("evaluate.instructions");
    if (input || !path.empty()) {
      items = read_jsonl<EvalItem>(input ? *input : fs::path(path), [](const Json& j) {
        EvalItem item;
        item.site = j.at("site").get<std::string>();
        item.instruction = {j.at("instruction").get<std::string>(), InstructionSource::kExternal};
        if (j.contains("task") && !j["task"].is_null()) item.task = j["task"].get<std::string>();
        return item;
      });
    } else {
      for (const auto& name : config.get_list("sites.names")) {
        const auto site = registry.fixture(name);
        if (!site) throw ConfigError("site '" + name + "' has no fixture tasks; set evaluate.instructions");
        for (const auto& task : site->tasks) {
          items.push_back({name, {task.description, InstructionSource::kExternal}, task.id, std::nullopt});
        }
      }
    }
  } else {
    throw ConfigError("unknown evaluate.source '" + source + "' (expected tasks or demos)");
  }
  if (const auto limit = config.get_size("evaluate.limit"); limit && items.size() > limit) {
    items.resize(limit);
  }
  return items;
}

StageResult stage_evaluate(const Config& config, TransportStack& stack, const fs::path& input_dir,
                           const std::optional<fs::path>& input, const fs::path& out_dir,
                           std::ostream& out) {
  AgentRunConfig agent;
  agent.max_steps = config.get_size("evaluate.max_steps");
  agent.style = context_style_from_string(config.get_string("export.style"));
  agent.check();
  const auto& reward = config.get_string("evaluate.reward");
  if (reward != "graded" && reward != "binary") {
    throw ConfigError("unknown evaluate.reward '" + reward + "' (expected graded or binary)");
  }
  const bool graded = reward == "graded";

  SiteRegistry registry(config);
  const auto items = eval_items(config, registry, input_dir, input);
  const auto roles = make_roles(config, stack.logging);
  const auto judge = [&](const Instruction& ins, const Trajectory& t, const std::string& scope) {
    return graded ? evaluate_graded(ins, t, roles, scope) : evaluate_binary(ins, t, roles, scope);
  };

  struct Outcome {
    std::optional<EvalRecord> agent;
    std::optional<EvalRecord> demo;
    std::string error;
    std::size_t partial = 0;
  };
  std::vector<Outcome> outcomes(items.size());
  parallel_for(items.size(), config.get_size("run.parallelism"), [&](std::size_t i) {
    const auto& item = items[i];
    char index[16];
    std::snprintf(index, sizeof index, "%04zu", i);
    const std::string scope = "eval/" + item.site + "/" + index;
    auto& o = outcomes[i];
    try {
      if (item.demo) o.demo = judge(item.instruction, item.demo->trajectory, scope + "/demo-judge");
      auto env = registry.make(item.site);
      auto traj = run_agent(*env, item.instruction, agent, roles, scope + "/agent");
      auto rec = judge(item.instruction, traj, scope + "/agent-judge");
      auto* fixture = dynamic_cast<FixtureEnvironment*>(env.get());
      if (item.task && fixture) {
        const auto& last = traj.steps.back().action;
        const std::string answer =
            last.kind == ActionKind::kStop ? last.payload.value_or("") : std::string();
        rec.task_success = check_task(fixture->site(), *item.task, fixture->state(), answer) == 1;
      }
      o.agent = std::move(rec);
    } catch (const RunError& e) {
      o.error = e.what();
      o.partial = e.partial().length();
    } catch (const Error& e) {
      o.error = e.what();
    }
  });

  std::vector<EvalRecord> agent_records, demo_records, paired_agent;
  std::vector<Json> failures;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& o = outcomes[i];
    if (o.agent) {
      agent_records.push_back(*o.agent);
      if (o.demo) {
        demo_records.push_back(*o.demo);
        paired_agent.push_back(*o.agent);
      }
    } else {
      failures.push_back({{"index", i},
                          {"site", items[i].site},
                          {"instruction", items[i].instruction.text},
                          {"error", o.error},
                          {"partial_actions", o.partial}});
    }
  }

  write_eval_records(out_dir / kEvalRecordsFile, agent_records);
  write_jsonl(out_dir / kEvalFailuresFile, failures, [](const Json& j) { return j; });
  StageResult r{kExitOk, {kEvalRecordsFile, kEvalFailuresFile, kEvalSummaryFile}};

  std::optional<double> wr;
  if (config.get_string("evaluate.source") == "demos") {
    write_eval_records(out_dir / kDemoEvalRecordsFile, demo_records);
    r.data_files.push_back(kDemoEvalRecordsFile);
    if (!demo_records.empty()) wr = win_rate(demo_records, paired_agent);
  } else if (const auto& baseline = config.get_string("evaluate.baseline"); !baseline.empty()) {
    const auto base = read_eval_records(baseline);
    wr = win_rate(agent_records, base);
  }
  auto summary = eval_summary(agent_records, wr);
  if (!demo_records.empty()) summary["demo_mean"] = mean_reward(demo_records);
  std::size_t successes = 0, checked = 0;
  for (const auto& rec : agent_records) {
    if (rec.task_success) {
      ++checked;
      successes += *rec.task_success;
    }
  }
  if (checked) summary["task_success_rate"] = static_cast<double>(successes) / checked;
  summary["failures"] = failures.size();
  write_text(out_dir / kEvalSummaryFile, summary.dump(2) + "\n");

  out << "evaluate: " << agent_records.size() << " records, " << failures.size() << " failed";
  if (!agent_records.empty()) out << ", mean " << mean_reward(agent_records);
  if (wr) out << ", win rate " << *wr;
  out << "\n";
  if (!items.empty() && agent_records.empty()) {
    r.exit_code = stack.counting.failures() > 0 ? kExitTransport : kExitRuntime;
  }
  return r;
}

using StageFn = StageResult (*)(const Config&, TransportStack&, const fs::path&,
                                const std::optional<fs::path>&, const fs::path&, std::ostream&);

StageFn stage_fn(Stage s) {
  switch (s) {
    case Stage::kCollect: return stage_collect;
    case Stage::kAnnotate: return stage_annotate;
    case Stage::kEvaluate: return stage_evaluate;
  }
  return nullptr;
}

int run_stage(Stage stage, const Config& config, const std::optional<fs::path>& input,
              std::ostream& out) {
  const fs::path out_dir = config.get_string("run.out");
  fs::create_directories(out_dir);
  TransportStack stack(make_base_transport(config));
  const auto result = stage_fn(stage)(config, stack, out_dir, input, out_dir, out);
  write_text(out_dir / config_record_name(stage), config.dump());
  if (config.get_bool("transport.record")) {
    stack.log.write(out_dir / role_log_name(stage));
    out << stage_name(stage) << ": " << stack.log.size() << " exchanges logged to "
        << (out_dir / role_log_name(stage)).string() << "\n";
  }
  return result.exit_code;
}

std::string first_difference(const ExchangeRecord& a, const ExchangeRecord& b) {
  if (a.scope != b.scope) return "scope";
  if (a.seq != b.seq) return "seq";
  if (a.role != b.role) return "role";
  if (a.attempt != b.attempt) return "attempt";
  if (a.prompt_hash != "*" && a.prompt_hash != b.prompt_hash) return "prompt";
  if (a.reply_hash != b.reply_hash) return "reply";
  return {};
}

// Eval records name the transport that judged them, which legitimately
// differs between a run and its replay; everything else must match.
std::string comparable(const fs::path& path) {
  auto text = read_text(path);
  const auto name = path.filename().string();
  if (name != kEvalRecordsFile && name != kDemoEvalRecordsFile) return text;
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = Json::parse(line);
    j["judge"].erase("transport");
    out += j.dump() + "\n";
  }
  return out;
}

struct TempDir {
  TempDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() /
           ("retrolabel-replay-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  fs::path path;
};

int run_replay(Config config, const fs::path& log_path, Stage stage,
               const std::optional<fs::path>& input, std::ostream& out) {
  auto original = RoleLog::read(log_path);
  if (original.empty()) throw PreconditionError("role log " + log_path.string() + " is empty");
  const auto log_dir = log_path.parent_path().empty() ? fs::path(".") : log_path.parent_path();

  TempDir tmp;
  TransportStack stack(std::make_unique<ReplayTransport>(original));
  const auto result = stage_fn(stage)(config, stack, log_dir, input, tmp.path, out);
  const auto regenerated = stack.log.records();

  const auto n = std::max(original.size(), regenerated.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= regenerated.size()) {
      out << "replay: divergence at exchange " << i << " (scope " << original[i].scope << ", seq "
          << original[i].seq << "): not reproduced\n";
      return kExitValidation;
    }
    if (i >= original.size()) {
      out << "replay: divergence at exchange " << i << " (scope " << regenerated[i].scope
          << ", seq " << regenerated[i].seq << "): not in the log\n";
      return kExitValidation;
    }
    if (const auto field = first_difference(original[i], regenerated[i]); !field.empty()) {
      out << "replay: divergence at exchange " << i << " (scope " << original[i].scope << ", seq "
          << original[i].seq << ", role " << to_string(original[i].role) << "): " << field
          << " differs\n";
      return kExitValidation;
    }
  }
  std::size_t compared = 0;
  for (const auto& name : result.data_files) {
    const auto recorded = log_dir / name;
    if (!fs::exists(recorded)) continue;
    if (comparable(recorded) != comparable(tmp.path / name)) {
      out << "replay: divergence in " << name << "\n";
      return kExitValidation;
    }
    ++compared;
  }
  out << "replay: identical (" << original.size() << " exchanges, " << compared
      << " output files)\n";
  return kExitOk;
}

std::string detect_kind(const Json& j) {
  if (j.contains("schema_version")) {
    const auto v = j["schema_version"];
    if (v == kDemonstrationSchemaVersion) return "demonstrations";
    if (v == kAnnotatedSchemaVersion) return "annotated";
    return "unknown schema_version " + v.dump();
  }
  if (j.contains("target_action")) return "sft";
  if (j.contains("halt_reason")) return "episodes";
  if (j.contains("graded_reward") || j.contains("binary_reward")) return "eval";
  if (j.contains("reply")) return "role_log";
  return "unknown";
}

// Returns the problems found in one file.
std::vector<std::string> validate_file(const fs::path& path, std::string& kind, std::size_t& count) {
  std::vector<std::string> problems;
  const auto ext = path.extension().string();
  if (ext == ".toml") {
    kind = "config";
    Config c;
    c.merge_file(path);
    explore_config(c);
    count = 1;
    return problems;
  }
  if (ext == ".json") {
    const auto j = Json::parse(read_text(path));
    if (j.is_array()) {
      kind = "personas";
      for (const auto& p : j) persona_from_json(p);
      count = j.size();
    } else {
      kind = "site";
      check_site(site_from_json(j));
      count = 1;
    }
    return problems;
  }
  std::string first;
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    while (std::getline(in, first) && first.empty()) {
    }
  }
  if (first.empty()) {
    kind = "empty";
    return problems;
  }
  Json head;
  try {
    head = Json::parse(first);
  } catch (const Json::exception& e) {
    throw ParseError(e.what(), 1);
  }
  kind = detect_kind(head);
  const auto report = [&](const std::string& id, const std::vector<Violation>& vs) {
    for (const auto& v : vs) {
      problems.push_back(id + (v.step ? " step " + std::to_string(*v.step) : std::string()) + ": " +
                         v.message);
    }
  };
  if (kind == "demonstrations") {
    const auto demos = read_demonstrations(path);
    count = demos.size();
    for (const auto& d : demos) {
      report(d.id(), validate(d.trajectory));
      if (d.binary_reward != 1) problems.push_back(d.id() + ": binary_reward is not 1");
      if (d.checkpoint_length != d.trajectory.length()) {
        problems.push_back(d.id() + ": checkpoint_length disagrees with the trajectory");
      }
    }
  } else if (kind == "annotated") {
    const auto demos = read_annotated(path);
    count = demos.size();
    for (const auto& d : demos) {
      report(d.demo.id(), validate(d.demo.trajectory));
      for (const auto& m : annotation_violations(d)) problems.push_back(d.demo.id() + ": " + m);
    }
  } else if (kind == "sft") {
    count = read_dataset(path).size();
  } else if (kind == "episodes") {
    count = read_episode_logs(path).size();
  } else if (kind == "eval") {
    const auto recs = read_eval_records(path);
    count = recs.size();
    for (std::size_t i = 0; i < recs.size(); ++i) report("record " + std::to_string(i), validate(recs[i].trajectory));
  } else if (kind == "role_log") {
    count = RoleLog::read(path).size();
  } else {
    problems.push_back("unrecognized record layout");
  }
  return problems;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const TransportError*>(&e)) return kExitTransport;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const PreconditionError*>(&e) || dynamic_cast<const ExportError*>(&e) ||
      dynamic_cast<const LookupError*>(&e) || dynamic_cast<const ActionError*>(&e) ||
      dynamic_cast<const RangeError*>(&e) || dynamic_cast<const TypeError*>(&e) ||
      dynamic_cast<const PairingError*>(&e)) {
    return kExitValidation;
  }
  return kExitRuntime;
}

struct GlobalOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  std::optional<std::int64_t> seed;
  std::string profile;
};

Config build_config(const GlobalOptions& g, const std::optional<fs::path>& recorded = std::nullopt) {
  Config c = g.profile.empty() ? Config() : Config::for_profile(g.profile);
  if (!g.config.empty()) {
    c.merge_file(g.config);
  } else if (recorded && fs::exists(*recorded)) {
    c.merge_file(*recorded);
  }
  for (const auto& o : g.overrides) c.apply_override(o);
  if (g.seed) c.set("run.seed", *g.seed);
  if (!g.out.empty()) c.set("run.out", g.out);
  return c;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthesizes web-agent demonstrations by exploring first and labeling afterwards.",
               "retrolabel"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config, "TOML config file");
  app.add_option("--set", g.overrides, "Override a config key (key=value, repeatable)");
  app.add_option("--out", g.out, "Output directory (run.out)");
  app.add_option("--seed", g.seed, "Campaign seed (run.seed)");
  app.add_option("--profile", g.profile, "Default bundle applied before the config file")
      ->check(CLI::IsMember({"webarena", "miniwob"}));

  auto* collect = app.add_subcommand("collect", "Explore sites and keep the demonstrations that pass");
  auto* annotate = app.add_subcommand("annotate", "Add per-step reasoning and a closing stop action");
  auto* exporter = app.add_subcommand("export", "Write SFT instances from annotated demonstrations");
  auto* evaluate = app.add_subcommand("evaluate", "Run the agent on instructions and judge the results");
  auto* stats = app.add_subcommand("stats", "Histogram and verb/object report of a demonstration file");
  auto* replay = app.add_subcommand("replay", "Re-execute a stage against its role log and compare");
  auto* validate_cmd = app.add_subcommand("validate", "Check files against their schemas and invariants");

  std::string input;
  for (auto* sub : {annotate, exporter, stats, evaluate}) {
    sub->add_option("--input", input, "Input file (defaults to the usual file in the output directory)");
  }
  std::string log_path, stage;
  replay->add_option("--log", log_path, "Role log to replay")->required();
  replay->add_option("--stage", stage, "collect, annotate or evaluate (default: from the log's name)");
  replay->add_option("--input", input, "Stage input (default: next to the log)");
  std::vector<std::string> files;
  validate_cmd->add_option("files", files, "Files to check")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  const std::optional<fs::path> input_path =
      input.empty() ? std::nullopt : std::optional<fs::path>(input);
  try {
    if (*collect) return run_stage(Stage::kCollect, build_config(g), std::nullopt, out);
    if (*annotate) return run_stage(Stage::kAnnotate, build_config(g), input_path, out);
    if (*evaluate) return run_stage(Stage::kEvaluate, build_config(g), input_path, out);

    if (*exporter) {
      const auto config = build_config(g);
      const fs::path dir = config.get_string("run.out");
      const auto style = context_style_from_string(config.get_string("export.style"));
      const auto demos = read_annotated(input_or(input_path, dir, kAnnotatedFile));
      const auto instances = export_instances(demos, style);
      fs::create_directories(dir);
      write_dataset(dir / kSftFile, instances);
      out << "export: " << instances.size() << " instances (style " << to_string(style) << ") from "
          << demos.size() << " demonstrations\n";
      return kExitOk;
    }

    if (*stats) {
      const auto config = build_config(g);
      const fs::path dir = config.get_string("run.out");
      fs::path file = input_path ? *input_path : dir / kAnnotatedFile;
      if (!input_path && !fs::exists(file)) file = dir / kDemosFile;
      std::string kind, first;
      {
        std::ifstream in(file, std::ios::binary);
        if (!in) throw ConfigError("cannot open " + file.string());
        while (std::getline(in, first) && first.empty()) {
        }
      }
      DatasetStats s;
      if (!first.empty() && detect_kind(Json::parse(first)) == "annotated") {
        s = dataset_stats(std::span<const AnnotatedDemonstration>(read_annotated(file)));
      } else {
        s = dataset_stats(std::span<const Demonstration>(read_demonstrations(file)));
      }
      fs::create_directories(dir);
      write_text(dir / kStatsJsonFile, s.to_json().dump(2) + "\n");
      write_text(dir / kStatsCsvFile, s.to_csv());
      out << "stats: " << s.demonstrations << " demonstrations, " << s.instance_count
          << " instances\n";
      return kExitOk;
    }

    if (*replay) {
      const fs::path log{log_path};
      const Stage st = stage.empty() ? stage_for_log(log) : stage_from_string(stage);
      const auto dir = log.parent_path().empty() ? fs::path(".") : log.parent_path();
      return run_replay(build_config(g, dir / config_record_name(st)), log, st, input_path, out);
    }

    if (*validate_cmd) {
      int code = kExitOk;
      for (const auto& f : files) {
        std::string kind;
        std::size_t count = 0;
        try {
          const auto problems = validate_file(f, kind, count);
          if (problems.empty()) {
            out << f << ": ok (" << kind << ", " << count << " records)\n";
          } else {
            code = kExitValidation;
            for (const auto& p : problems) out << f << ": " << p << "\n";
          }
        } catch (const Json::exception& e) {
          code = kExitValidation;
          out << f << ": " << e.what() << "\n";
        } catch (const Error& e) {
          code = std::max(code, exit_code_for(e));
          out << f << ": " << e.what() << "\n";
        }
      }
      return code;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const Json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("retrolabel");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace retrolabel
