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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "retrolabel/prompt.hpp"
#include "retrolabel/trajectory.hpp"

namespace retrolabel {

std::string sha256_hex(std::string_view data);

struct CompletionRequest {
  Role role = Role::kExplore;
  std::string prompt;
  std::string scope;      // episode or demonstration the call belongs to
  std::uint64_t seq = 0;  // position of the call within its scope
  int attempt = 1;
};

enum class TransportMode { kLive, kReplay, kMock };

std::string_view to_string(TransportMode mode);

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds backoff{0};

  /// 3 attempts everywhere; 1 s fixed backoff in live mode only.
  static RetryPolicy for_mode(TransportMode mode);
};

/// Channel through which a role turns a prompt into reply text. Every
/// implementation is safe for concurrent calls.
class RoleTransport {
 public:
  explicit RoleTransport(RetryPolicy policy) : policy_(policy) {}
  virtual ~RoleTransport() = default;

  virtual std::string complete(const CompletionRequest& request) = 0;
  virtual TransportMode mode() const = 0;

  const RetryPolicy& retry_policy() const { return policy_; }

 private:
  RetryPolicy policy_;
};

/// One prompt/reply exchange; the unit of role logs and replay scripts.
struct ExchangeRecord {
  std::string scope;
  std::uint64_t seq = 0;
  Role role = Role::kExplore;
  int attempt = 1;
  std::string prompt_hash;
  std::string prompt;
  std::string reply;
  std::string reply_hash;

  Json to_json() const;
  /// Accepts hand-written records: a missing prompt_hash is computed from the
  /// prompt, and a record with neither matches any prompt of its role.
  static ExchangeRecord from_json(const Json& j);

  bool operator==(const ExchangeRecord&) const = default;
};

/// Thread-safe append-only collection of exchanges.
class RoleLog {
 public:
  void append(ExchangeRecord record);
  /// Canonical order: by scope, then by sequence number within the scope.
  std::vector<ExchangeRecord> records() const;
  std::size_t size() const;
  void write(const std::filesystem::path& path) const;

  static std::vector<ExchangeRecord> read(const std::filesystem::path& path);

 private:
  mutable std::mutex mu_;
  std::vector<ExchangeRecord> records_;
};

/// Wraps another transport and records every exchange into a RoleLog.
class LoggingTransport final : public RoleTransport {
 public:
  LoggingTransport(RoleTransport& inner, RoleLog& log);
  std::string complete(const CompletionRequest& request) override;
  TransportMode mode() const override { return inner_.mode(); }

 private:
  RoleTransport& inner_;
  RoleLog& log_;
};

/// Serves replies from a recorded script. Lookup order for a request is
/// (scope, role, prompt hash), then unscoped records with the same hash, then
/// wildcard records for the role. Each record is consumed at most once, in
/// script order. A request nothing matches raises ReplayMissError.
class ReplayTransport final : public RoleTransport {
 public:
  explicit ReplayTransport(std::vector<ExchangeRecord> script);
  static std::unique_ptr<ReplayTransport> from_file(const std::filesystem::path& path);

  std::string complete(const CompletionRequest& request) override;
  TransportMode mode() const override { return TransportMode::kReplay; }

  std::size_t remaining() const;

 private:
  using Key = std::tuple<std::string, Role, std::string>;
  std::optional<std::string> take(const Key& key);

  mutable std::mutex mu_;
  std::map<Key, std::vector<std::string>> queues_;
  std::map<Key, std::size_t> cursor_;
};

/// Rule-table transport: the first rule that returns a reply wins.
class MockTransport final : public RoleTransport {
 public:
  struct Rule {
    std::optional<Role> role;  // unset: any role
    std::function<std::optional<std::string>(const CompletionRequest&)> reply;
  };

  explicit MockTransport(std::vector<Rule> rules);

  /// Replies `reply` to any prompt of `role` containing `needle`.
  static Rule when_contains(Role role, std::string needle, std::string reply);
  /// Replies `reply` to every prompt of `role`.
  static Rule always(Role role, std::string reply);

  std::string complete(const CompletionRequest& request) override;
  TransportMode mode() const override { return TransportMode::kMock; }

 private:
  std::vector<Rule> rules_;
};

struct LiveConfig {
  std::string base_url = "http://127.0.0.1:8000";
  std::string model = "gpt-4o-mini";
  double temperature = 1.0;
  std::string api_key;  // taken from the environment by the CLI
  std::chrono::seconds timeout{120};
};

/// Chat-completion client: POST <base_url>/v1/chat/completions with the prompt
/// as a single user message; returns the first choice's message content.
/// Connection failures, 429 and 5xx responses are retried under the policy.
class LiveTransport final : public RoleTransport {
 public:
  explicit LiveTransport(LiveConfig config,
                         RetryPolicy policy = RetryPolicy::for_mode(TransportMode::kLive));

  std::string complete(const CompletionRequest& request) override;
  TransportMode mode() const override { return TransportMode::kLive; }

  /// Request body sent for a prompt.
  Json request_body(const std::string& prompt) const;
  /// Extracts choices[0].message.content; throws TransportError otherwise.
  static std::string parse_response(const std::string& body);

 private:
  LiveConfig config_;
};

}  // namespace retrolabel
