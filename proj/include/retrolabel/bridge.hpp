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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "retrolabel/env.hpp"

namespace retrolabel {

// Bridge protocol: one JSON object per line in each direction.
//
//   request  {"v":1,"op":"hello"}                     -> {"v":1,"type":"hello",...}
//   request  {"v":1,"op":"reset","seed":7}            -> {"v":1,"type":"observation",...}
//   request  {"v":1,"op":"step","action":{...}}       -> observation | terminal | error
//   request  {"v":1,"op":"render"}                    -> {"v":1,"type":"render","text":...}
//   request  {"v":1,"op":"bye"}                       -> {"v":1,"type":"bye"}
//
// Errors carry a code ("lifecycle", "action", "config", "protocol",
// "version") that the client maps back onto the library's exception types.
inline constexpr int kBridgeProtocolVersion = 1;
inline constexpr std::string_view kBridgeProtocolName = "retrolabel-env";

class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void send(const std::string& line) = 0;
  /// Next line without its terminator; nullopt on end of stream.
  virtual std::optional<std::string> receive() = 0;
};

/// Line channel over a pair of POSIX file descriptors.
class FdChannel : public LineChannel {
 public:
  FdChannel(int read_fd, int write_fd, bool owns_fds);
  ~FdChannel() override;
  FdChannel(const FdChannel&) = delete;
  FdChannel& operator=(const FdChannel&) = delete;

  void send(const std::string& line) override;
  std::optional<std::string> receive() override;

 private:
  int read_fd_;
  int write_fd_;
  bool owns_;
  std::string buffer_;
};

/// Starts `argv` as a child process and talks to it over its stdin/stdout.
std::unique_ptr<LineChannel> spawn_process_channel(const std::vector<std::string>& argv);

/// Connects to a bridge server on host:port.
std::unique_ptr<LineChannel> connect_tcp(const std::string& host, std::uint16_t port);

class TcpListener {
 public:
  /// Binds 127.0.0.1:port; port 0 picks a free one.
  explicit TcpListener(std::uint16_t port = 0);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  std::unique_ptr<LineChannel> accept();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

/// Answers one bridge request against `env`. Never throws; failures become
/// error responses.
Json handle_bridge_request(Environment& env, const Json& request);

/// Serves requests until end of stream or a "bye" request.
void serve_bridge(Environment& env, LineChannel& channel);

/// Client side: an Environment whose dynamics live behind a bridge.
class BridgeEnvironment final : public Environment {
 public:
  /// Performs the version handshake; throws ConfigError on mismatch.
  explicit BridgeEnvironment(std::unique_ptr<LineChannel> channel);
  ~BridgeEnvironment() override;

  Observation reset(std::uint64_t seed) override;
  StepResult step(const Action& action) override;
  std::string render() const override;

 private:
  Json call(const Json& request) const;

  std::unique_ptr<LineChannel> channel_;
};

}  // namespace retrolabel
