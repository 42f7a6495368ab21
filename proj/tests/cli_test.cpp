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

#include <cstdlib>
#include <sstream>

#include "retrolabel/cli.hpp"
#include "retrolabel/evaluator.hpp"
#include "retrolabel/explorer.hpp"
#include "retrolabel/exporter.hpp"
#include "support.hpp"

namespace retrolabel {
namespace {

using testing::read_file;
using testing::TempDir;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// Small, fast collection on the store fixture.
std::vector<std::string> small(const std::filesystem::path& out, std::vector<std::string> rest) {
  std::vector<std::string> args{"--out", out.string(), "--set", "explore.t_max=8", "--set",
                                "explore.episodes_per_site=6", "--set", "sites.names=shopsim"};
  args.insert(args.end(), rest.begin(), rest.end());
  return args;
}

TEST(CliTest, HelpListsEverything) {
  const auto r = cli({"--help"});
  EXPECT_EQ(r.code, 0);
  for (const char* word : {"--config", "--set", "--out", "--seed", "--profile", "collect", "annotate",
                           "export", "evaluate", "stats", "replay", "validate"}) {
    EXPECT_NE(r.out.find(word), std::string::npos) << word;
  }
  const auto sub = cli({"replay", "--help"});
  EXPECT_NE(sub.out.find("--log"), std::string::npos);
  EXPECT_NE(sub.out.find("--stage"), std::string::npos);
}

TEST(CliTest, UsageErrors) {
  EXPECT_EQ(cli({}).code, kExitValidation);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitValidation);
  EXPECT_EQ(cli({"--profile", "desktop", "collect"}).code, kExitValidation);
  TempDir dir;
  EXPECT_EQ(cli({"--config", (dir / "missing.toml").string(), "collect"}).code, kExitValidation);
  const auto bad = cli(small(dir.path, {"--set", "explore.prune_interval=0", "collect"}));
  EXPECT_EQ(bad.code, kExitValidation);
  EXPECT_NE(bad.err.find("prune_interval"), std::string::npos) << bad.err;
  EXPECT_EQ(cli(small(dir.path, {"--set", "explore.nope=1", "collect"})).code, kExitValidation);
}

TEST(CliTest, PipelineAndReplay) {
  TempDir dir;
  const auto out = dir / "run";
  const auto collect = cli(small(out, {"collect"}));
  ASSERT_EQ(collect.code, 0) << collect.err;
  for (const char* f : {"demonstrations.jsonl", "episodes.jsonl", "savings.json", "role_log.jsonl",
                        "collect.config.toml"}) {
    EXPECT_TRUE(std::filesystem::exists(out / f)) << f;
  }
  const auto logs = read_episode_logs(out / "episodes.jsonl");
  EXPECT_EQ(logs.size(), 6u);
  for (const auto& l : logs) EXPECT_LE(l.actions_taken, 8u);

  ASSERT_EQ(cli(small(out, {"annotate"})).code, 0);
  ASSERT_EQ(cli(small(out, {"export"})).code, 0);
  ASSERT_EQ(cli(small(out, {"stats"})).code, 0);
  const auto annotated = read_annotated(out / "annotated.jsonl");
  std::size_t actions = 0;
  for (const auto& a : annotated) actions += a.demo.trajectory.length();
  EXPECT_EQ(read_dataset(out / "sft.jsonl").size(), actions);
  EXPECT_NE(read_file(out / "stats.csv").find("histogram,bin,count"), std::string::npos);

  const auto same = cli({"replay", "--log", (out / "role_log.jsonl").string()});
  EXPECT_EQ(same.code, 0) << same.out << same.err;
  EXPECT_NE(same.out.find("replay: identical"), std::string::npos) << same.out;
  const auto same_annotate = cli({"replay", "--log", (out / "annotate_role_log.jsonl").string()});
  EXPECT_EQ(same_annotate.code, 0) << same_annotate.out << same_annotate.err;

  const auto v = cli({"validate", (out / "demonstrations.jsonl").string(),
                      (out / "annotated.jsonl").string(), (out / "sft.jsonl").string(),
                      (out / "episodes.jsonl").string(), (out / "role_log.jsonl").string(),
                      (out / "collect.config.toml").string()});
  EXPECT_EQ(v.code, 0) << v.out;
}

TEST(CliTest, ReplayTransportReproducesCollect) {
  TempDir dir;
  ASSERT_EQ(cli(small(dir / "a", {"collect"})).code, 0);
  const auto log = (dir / "a" / "role_log.jsonl").string();
  const auto r = cli(small(dir / "b", {"--set", "transport.mode=replay", "--set",
                                       "transport.replay_log=" + log, "collect"}));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file(dir / "a" / "demonstrations.jsonl"), read_file(dir / "b" / "demonstrations.jsonl"));
  EXPECT_EQ(read_file(dir / "a" / "role_log.jsonl"), read_file(dir / "b" / "role_log.jsonl"));
}

TEST(CliTest, EditedReplyDiverges) {
  TempDir dir;
  const auto out = dir / "run";
  ASSERT_EQ(cli(small(out, {"collect"})).code, 0);
  auto records = RoleLog::read(out / "role_log.jsonl");
  ASSERT_GT(records.size(), 4u);
  records[4].reply += " (edited)";
  RoleLog edited;
  for (auto& r : records) edited.append(r);
  edited.write(out / "role_log.jsonl");
  const auto r = cli({"replay", "--log", (out / "role_log.jsonl").string()});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.out.find("divergence at exchange 4"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("reply differs"), std::string::npos) << r.out;
}

TEST(CliTest, EmptyLogIsRejected) {
  TempDir dir;
  const auto out = dir / "run";
  ASSERT_EQ(cli(small(out, {"collect"})).code, 0);
  testing::write_file(out / "role_log.jsonl", "");
  EXPECT_NE(cli({"replay", "--log", (out / "role_log.jsonl").string()}).code, 0);
}

TEST(CliTest, ValidateReportsProblems) {
  TempDir dir;
  testing::write_file(dir / "bad.jsonl", "{\"target_action\": \"wave\"}\n");
  const auto r = cli({"validate", (dir / "bad.jsonl").string()});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.out.find("bad.jsonl"), std::string::npos);
  testing::write_file(dir / "c.toml", "[explore]\nt_max = \"x\"\n");
  EXPECT_EQ(cli({"validate", (dir / "c.toml").string()}).code, kExitValidation);
  const auto site = cli({"validate", (std::filesystem::path(RETROLABEL_SOURCE_DIR) / "data/sites/shopsim.json").string()});
  EXPECT_EQ(site.code, 0) << site.out;
}

TEST(CliTest, EvaluateTasks) {
  TempDir dir;
  const auto r = cli(small(dir.path, {"--set", "evaluate.max_steps=5", "evaluate"}));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto records = read_eval_records(dir / "eval_records.jsonl");
  ASSERT_FALSE(records.empty());
  for (const auto& rec : records) {
    EXPECT_LE(rec.trajectory.length(), 5u);
    EXPECT_TRUE(rec.task_success.has_value());
    EXPECT_GE(rec.reward, 1);
    EXPECT_LE(rec.reward, 5);
  }
  const auto summary = Json::parse(read_file(dir / "eval_summary.json"));
  EXPECT_EQ(summary.at("count"), records.size());
  const auto again = cli({"replay", "--log", (dir / "evaluate_role_log.jsonl").string()});
  EXPECT_EQ(again.code, 0) << again.out << again.err;
}

TEST(CliTest, RerunsAreByteIdentical) {
  TempDir dir;
  for (const char* name : {"a", "b"}) {
    ASSERT_EQ(cli(small(dir / name, {"collect"})).code, 0);
    ASSERT_EQ(cli(small(dir / name, {"annotate"})).code, 0);
    ASSERT_EQ(cli(small(dir / name, {"export"})).code, 0);
  }
  for (const char* f : {"demonstrations.jsonl", "episodes.jsonl", "annotated.jsonl", "sft.jsonl",
                        "role_log.jsonl", "annotate_role_log.jsonl"}) {
    EXPECT_EQ(read_file(dir / "a" / f), read_file(dir / "b" / f)) << f;
  }
}

TEST(CliTest, BinaryRuns) {
  TempDir dir;
  const std::string cmd = std::string("\"") + RETROLABEL_CLI + "\" --out \"" + dir.path.string() +
                          "\" --set explore.t_max=4 --set explore.episodes_per_site=2 collect > \"" +
                          (dir / "stdout.txt").string() + "\" 2>&1";
  EXPECT_EQ(std::system(cmd.c_str()), 0) << read_file(dir / "stdout.txt");
  EXPECT_TRUE(std::filesystem::exists(dir / "demonstrations.jsonl"));
  const std::string bad = std::string("\"") + RETROLABEL_CLI + "\" nothing > /dev/null 2>&1";
  const int status = std::system(bad.c_str());
  EXPECT_EQ(WEXITSTATUS(status), 1);
}

}  // namespace
}  // namespace retrolabel
