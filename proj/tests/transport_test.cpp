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

#include <thread>

#include "httplib.h"
#include "retrolabel/bridge.hpp"
#include "retrolabel/error.hpp"
#include "retrolabel/transport.hpp"
#include "support.hpp"

namespace retrolabel {
namespace {

CompletionRequest request(Role role, std::string prompt, std::string scope = "s", std::uint64_t seq = 0) {
  CompletionRequest r;
  r.role = role;
  r.prompt = std::move(prompt);
  r.scope = std::move(scope);
  r.seq = seq;
  return r;
}

TEST(Sha256Test, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(RetryPolicyTest, PerModeDefaults) {
  EXPECT_EQ(RetryPolicy::for_mode(TransportMode::kLive).max_attempts, 3);
  EXPECT_EQ(RetryPolicy::for_mode(TransportMode::kLive).backoff, std::chrono::seconds(1));
  EXPECT_EQ(RetryPolicy::for_mode(TransportMode::kReplay).backoff.count(), 0);
  EXPECT_EQ(RetryPolicy::for_mode(TransportMode::kMock).backoff.count(), 0);
}

TEST(MockTransportTest, FirstMatchingRuleWins) {
  MockTransport t({MockTransport::when_contains(Role::kDelta, "search", "searched"),
                   MockTransport::always(Role::kDelta, "other")});
  EXPECT_EQ(t.complete(request(Role::kDelta, "a search page")), "searched");
  EXPECT_EQ(t.complete(request(Role::kDelta, "a cart")), "other");
  EXPECT_THROW(t.complete(request(Role::kLabel, "x")), TransportError);
}

TEST(ReplayTransportTest, ScopedHashedUnscopedAndWildcard) {
  ExchangeRecord scoped{"ep-1", 0, Role::kLabel, 1, sha256_hex("p"), "p", "scoped", ""};
  ExchangeRecord unscoped{"", 0, Role::kLabel, 1, sha256_hex("p"), "p", "unscoped", ""};
  ExchangeRecord wild{"", 0, Role::kDelta, 1, "*", "", "wild", ""};
  ReplayTransport t({scoped, unscoped, wild});
  EXPECT_EQ(t.complete(request(Role::kLabel, "p", "ep-1")), "scoped");
  EXPECT_EQ(t.complete(request(Role::kLabel, "p", "ep-2")), "unscoped");
  EXPECT_EQ(t.complete(request(Role::kDelta, "anything")), "wild");
  EXPECT_THROW(t.complete(request(Role::kLabel, "p", "ep-1")), ReplayMissError);
  EXPECT_THROW(t.complete(request(Role::kLabel, "unmatched")), ReplayMissError);
  EXPECT_EQ(t.remaining(), 0u);
}

TEST(ReplayTransportTest, RecordsAreConsumedInOrder) {
  std::vector<ExchangeRecord> script;
  for (const char* reply : {"first", "second"}) {
    script.push_back({"", 0, Role::kLabel, 1, "*", "", reply, ""});
  }
  ReplayTransport t(script);
  EXPECT_EQ(t.remaining(), 2u);
  EXPECT_EQ(t.complete(request(Role::kLabel, "q")), "first");
  EXPECT_EQ(t.complete(request(Role::kLabel, "q")), "second");
}

TEST(RoleLogTest, LoggingTransportRecordsCanonically) {
  MockTransport inner({{std::nullopt, [](const CompletionRequest& r) -> std::optional<std::string> {
                          return "reply to " + r.prompt;
                        }}});
  RoleLog log;
  LoggingTransport t(inner, log);
  t.complete(request(Role::kLabel, "b1", "b", 1));
  t.complete(request(Role::kDelta, "a0", "a", 0));
  t.complete(request(Role::kLabel, "b0", "b", 0));
  const auto records = log.records();
  ASSERT_EQ(records.size(), 3u);
  EXPECT_EQ(records[0].scope, "a");
  EXPECT_EQ(records[1].prompt, "b0");
  EXPECT_EQ(records[2].prompt, "b1");
  EXPECT_EQ(records[2].reply, "reply to b1");
  EXPECT_EQ(records[2].prompt_hash, sha256_hex("b1"));
  EXPECT_EQ(records[2].reply_hash, sha256_hex("reply to b1"));

  testing::TempDir dir;
  log.write(dir / "log.jsonl");
  EXPECT_EQ(RoleLog::read(dir / "log.jsonl"), records);

  // A log is a replay script for the same calls.
  auto replay = ReplayTransport::from_file(dir / "log.jsonl");
  EXPECT_EQ(replay->complete(request(Role::kLabel, "b0", "b", 0)), "reply to b0");
}

TEST(ExchangeRecordTest, HandWrittenRecordsFillHashes) {
  const auto with_prompt = ExchangeRecord::from_json({{"role", "label"}, {"prompt", "p"}, {"reply", "r"}});
  EXPECT_EQ(with_prompt.prompt_hash, sha256_hex("p"));
  EXPECT_EQ(with_prompt.reply_hash, sha256_hex("r"));
  const auto wildcard = ExchangeRecord::from_json({{"role", "label"}, {"reply", "r"}});
  EXPECT_EQ(wildcard.prompt_hash, "*");
  EXPECT_THROW(ExchangeRecord::from_json({{"role", "wizard"}, {"reply", "r"}}), Error);
}

// Chat-completion server on a background thread; each test scripts the
// status codes it answers with.
class FakeServer {
 public:
  explicit FakeServer(std::vector<int> statuses) : statuses_(std::move(statuses)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      bodies_.push_back(req.body);
      auth_.push_back(req.get_header_value("Authorization"));
      const int status = calls_ < statuses_.size() ? statuses_[calls_] : 200;
      ++calls_;
      res.status = status;
      if (status == 200) {
        res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"Looks right.\nANSWER: 1"}}]})",
                        "application/json");
      } else {
        res.set_content("{}", "application/json");
      }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  std::size_t calls() const { return calls_; }
  const std::vector<std::string>& bodies() const { return bodies_; }
  const std::vector<std::string>& auth() const { return auth_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::vector<int> statuses_;
  std::size_t calls_ = 0;
  std::vector<std::string> bodies_;
  std::vector<std::string> auth_;
};

LiveTransport live(const std::string& url, int attempts = 3) {
  LiveConfig c;
  c.base_url = url;
  c.model = "test-model";
  c.temperature = 0.5;
  c.api_key = "sk-test";
  c.timeout = std::chrono::seconds(5);
  return LiveTransport(c, RetryPolicy{attempts, std::chrono::milliseconds(0)});
}

TEST(LiveTransportTest, PostsChatCompletion) {
  FakeServer server({});
  auto t = live(server.url());
  EXPECT_EQ(t.complete(request(Role::kBinaryReward, "Score this.")), "Looks right.\nANSWER: 1");
  ASSERT_EQ(server.calls(), 1u);
  const auto body = Json::parse(server.bodies()[0]);
  EXPECT_EQ(body.at("model"), "test-model");
  EXPECT_EQ(body.at("temperature"), 0.5);
  ASSERT_EQ(body.at("messages").size(), 1u);
  EXPECT_EQ(body["messages"][0].at("role"), "user");
  EXPECT_EQ(body["messages"][0].at("content"), "Score this.");
  EXPECT_EQ(server.auth()[0], "Bearer sk-test");
}

TEST(LiveTransportTest, RetriesServerErrorsAndRateLimits) {
  FakeServer server({500, 429});
  auto t = live(server.url());
  EXPECT_EQ(t.complete(request(Role::kLabel, "x")), "Looks right.\nANSWER: 1");
  EXPECT_EQ(server.calls(), 3u);
}

TEST(LiveTransportTest, GivesUpAfterPolicyLimit) {
  FakeServer server({503, 503, 503, 503});
  auto t = live(server.url());
  EXPECT_THROW(t.complete(request(Role::kLabel, "x")), TransportError);
  EXPECT_EQ(server.calls(), 3u);
}

TEST(LiveTransportTest, ClientErrorIsNotRetried) {
  FakeServer server({400});
  auto t = live(server.url());
  EXPECT_THROW(t.complete(request(Role::kLabel, "x")), TransportError);
  EXPECT_EQ(server.calls(), 1u);
}

TEST(LiveTransportTest, PathPrefixIsKept) {
  httplib::Server server;
  std::string seen;
  server.Post("/proxy/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen = req.path;
    res.set_content(R"({"choices":[{"message":{"content":"ok"}}]})", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  auto t = live("http://127.0.0.1:" + std::to_string(port) + "/proxy/");
  EXPECT_EQ(t.complete(request(Role::kLabel, "x")), "ok");
  EXPECT_EQ(seen, "/proxy/v1/chat/completions");
  server.stop();
  th.join();
}

TEST(LiveTransportTest, UnreachableServerIsTransportError) {
  int port;
  {
    TcpListener probe;
    port = probe.port();
  }
  auto t = live("http://127.0.0.1:" + std::to_string(port), 2);
  EXPECT_THROW(t.complete(request(Role::kLabel, "x")), TransportError);
}

TEST(LiveTransportTest, ParseResponse) {
  EXPECT_EQ(LiveTransport::parse_response(R"({"choices":[{"message":{"content":"hi"}}]})"), "hi");
  EXPECT_THROW(LiveTransport::parse_response(R"({"choices":[]})"), TransportError);
  EXPECT_THROW(LiveTransport::parse_response("not json"), TransportError);
}

}  // namespace
}  // namespace retrolabel
