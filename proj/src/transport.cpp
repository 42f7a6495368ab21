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

#include "retrolabel/transport.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "retrolabel/error.hpp"

namespace retrolabel {
namespace {

constexpr std::string_view kWildcard = "*";

}  // namespace

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string_view to_string(TransportMode mode) {
  switch (mode) {
    case TransportMode::kLive:
      return "live";
    case TransportMode::kReplay:
      return "replay";
    case TransportMode::kMock:
      return "mock";
  }
  return "";
}

RetryPolicy RetryPolicy::for_mode(TransportMode mode) {
  RetryPolicy p;
  if (mode == TransportMode::kLive) p.backoff = std::chrono::seconds(1);
  return p;
}

Json ExchangeRecord::to_json() const {
  return {{"scope", scope},   {"seq", seq},       {"role", retrolabel::to_string(role)},
          {"attempt", attempt}, {"prompt_hash", prompt_hash}, {"prompt", prompt},
          {"reply", reply},   {"reply_hash", reply_hash}};
}

ExchangeRecord ExchangeRecord::from_json(const Json& j) {
  ExchangeRecord r;
  const auto role_name = j.at("role").get<std::string>();
  const auto role = role_from_string(role_name);
  if (!role) throw ParseError("unknown role '" + role_name + "'");
  r.role = *role;
  r.scope = j.value("scope", std::string{});
  r.seq = j.value("seq", std::uint64_t{0});
  r.attempt = j.value("attempt", 1);
  r.prompt = j.value("prompt", std::string{});
  r.reply = j.at("reply").get<std::string>();
  r.prompt_hash = j.value("prompt_hash", std::string{});
  if (r.prompt_hash.empty()) {
    r.prompt_hash = j.contains("prompt") ? sha256_hex(r.prompt) : std::string(kWildcard);
  }
  r.reply_hash = j.value("reply_hash", sha256_hex(r.reply));
  return r;
}

void RoleLog::append(ExchangeRecord record) {
  std::lock_guard lock(mu_);
  records_.push_back(std::move(record));
}

std::vector<ExchangeRecord> RoleLog::records() const {
  std::vector<ExchangeRecord> out;
  {
    std::lock_guard lock(mu_);
    out = records_;
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.scope, a.seq) < std::tie(b.scope, b.seq);
  });
  return out;
}

std::size_t RoleLog::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

void RoleLog::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write role log " + path.string());
  for (const auto& r : records()) out << r.to_json().dump() << '\n';
}

std::vector<ExchangeRecord> RoleLog::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open role log " + path.string());
  std::vector<ExchangeRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(ExchangeRecord::from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), lineno);
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what(), lineno);
    }
  }
  return out;
}

LoggingTransport::LoggingTransport(RoleTransport& inner, RoleLog& log)
    : RoleTransport(inner.retry_policy()), inner_(inner), log_(log) {}

std::string LoggingTransport::complete(const CompletionRequest& request) {
  auto reply = inner_.complete(request);
  ExchangeRecord r;
  r.scope = request.scope;
  r.seq = request.seq;
  r.role = request.role;
  r.attempt = request.attempt;
  r.prompt_hash = sha256_hex(request.prompt);
  r.prompt = request.prompt;
  r.reply = reply;
  r.reply_hash = sha256_hex(reply);
  log_.append(std::move(r));
  return reply;
}

ReplayTransport::ReplayTransport(std::vector<ExchangeRecord> script)
    : RoleTransport(RetryPolicy::for_mode(TransportMode::kReplay)) {
  for (auto& r : script) {
    queues_[Key{r.scope, r.role, r.prompt_hash}].push_back(std::move(r.reply));
  }
}

std::unique_ptr<ReplayTransport> ReplayTransport::from_file(const std::filesystem::path& path) {
  return std::make_unique<ReplayTransport>(RoleLog::read(path));
}

std::optional<std::string> ReplayTransport::take(const Key& key) {
  auto it = queues_.find(key);
  if (it == queues_.end()) return std::nullopt;
  auto& pos = cursor_[key];
  if (pos >= it->second.size()) return std::nullopt;
  return it->second[pos++];
}

std::string ReplayTransport::complete(const CompletionRequest& request) {
  const auto hash = sha256_hex(request.prompt);
  std::lock_guard lock(mu_);
  for (const auto& key : {Key{request.scope, request.role, hash}, Key{"", request.role, hash},
                          Key{request.scope, request.role, std::string(kWildcard)},
                          Key{"", request.role, std::string(kWildcard)}}) {
    if (auto reply = take(key)) return *reply;
  }
  throw ReplayMissError("replay miss: no recorded reply for role '" +
                        std::string(to_string(request.role)) + "' in scope '" + request.scope +
                        "' (seq " + std::to_string(request.seq) + ", prompt " +
                        hash.substr(0, 12) + ")");
}

std::size_t ReplayTransport::remaining() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [key, replies] : queues_) {
    auto it = cursor_.find(key);
    n += replies.size() - (it == cursor_.end() ? 0 : it->second);
  }
  return n;
}

MockTransport::MockTransport(std::vector<Rule> rules)
    : RoleTransport(RetryPolicy::for_mode(TransportMode::kMock)), rules_(std::move(rules)) {}

MockTransport::Rule MockTransport::when_contains(Role role, std::string needle, std::string reply) {
  return {role, [needle = std::move(needle), reply = std::move(reply)](
                    const CompletionRequest& r) -> std::optional<std::string> {
            if (r.prompt.find(needle) != std::string::npos) return reply;
            return std::nullopt;
          }};
}

MockTransport::Rule MockTransport::always(Role role, std::string reply) {
  return {role, [reply = std::move(reply)](const CompletionRequest&) -> std::optional<std::string> {
            return reply;
          }};
}

std::string MockTransport::complete(const CompletionRequest& request) {
  for (const auto& rule : rules_) {
    if (rule.role && *rule.role != request.role) continue;
    if (auto reply = rule.reply(request)) return *reply;
  }
  throw TransportError("mock transport: no rule for role '" +
                       std::string(to_string(request.role)) + "'");
}

LiveTransport::LiveTransport(LiveConfig config, RetryPolicy policy)
    : RoleTransport(policy), config_(std::move(config)) {
  if (config_.base_url.empty()) throw ConfigError("live transport needs a base URL");
}

Json LiveTransport::request_body(const std::string& prompt) const {
  return {{"model", config_.model},
          {"messages", Json::array({{{"role", "user"}, {"content", prompt}}})},
          {"temperature", config_.temperature}};
}

std::string LiveTransport::parse_response(const std::string& body) {
  try {
    const auto j = Json::parse(body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw TransportError("chat completion content is not a string");
    return content.get<std::string>();
  } catch (const Json::exception& e) {
    throw TransportError(std::string("malformed chat completion response: ") + e.what());
  }
}

std::string LiveTransport::complete(const CompletionRequest& request) {
  // Split "scheme://host[:port][/prefix]" so a path prefix survives.
  std::string origin = config_.base_url;
  std::string prefix;
  if (auto scheme = origin.find("://"); scheme != std::string::npos) {
    if (auto slash = origin.find('/', scheme + 3); slash != std::string::npos) {
      prefix = origin.substr(slash);
      origin.resize(slash);
    }
  }
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  const auto path = prefix + "/v1/chat/completions";
  const auto body = request_body(request.prompt).dump();

  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  const auto& policy = retry_policy();
  std::string last_error;
  for (int attempt = 1; attempt <= std::max(1, policy.max_attempts); ++attempt) {
    if (attempt > 1 && policy.backoff.count() > 0) std::this_thread::sleep_for(policy.backoff);
    httplib::Client client(origin);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw TransportError("chat completion returned HTTP " + std::to_string(res->status) +
                           ": " + res->body);
    }
    return parse_response(res->body);
  }
  throw TransportError("chat completion failed after " + std::to_string(policy.max_attempts) +
                       " attempts: " + last_error);
}

}  // namespace retrolabel
