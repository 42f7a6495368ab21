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

#include "retrolabel/bridge.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "retrolabel/error.hpp"

namespace retrolabel {
namespace {

std::string errno_message(const char* what) {
  return std::string(what) + ": " + std::strerror(errno);
}

Json envelope(const char* type) {
  return {{"v", kBridgeProtocolVersion}, {"type", type}};
}

Json error_response(const char* code, const std::string& message) {
  auto j = envelope("error");
  j["code"] = code;
  j["message"] = message;
  return j;
}

[[noreturn]] void rethrow_remote(const Json& response) {
  const auto code = response.value("code", std::string{"protocol"});
  const auto msg = "bridge: " + response.value("message", std::string{});
  if (code == "lifecycle") throw LifecycleError(msg);
  if (code == "action") throw ActionError(msg);
  if (code == "config" || code == "version") throw ConfigError(msg);
  throw TransportError(msg);
}

class ProcessChannel final : public LineChannel {
 public:
  ProcessChannel(pid_t pid, int read_fd, int write_fd)
      : pid_(pid), fds_(std::make_unique<FdChannel>(read_fd, write_fd, true)) {}
  ~ProcessChannel() override {
    fds_.reset();  // closing stdin lets the child exit
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
  void send(const std::string& line) override { fds_->send(line); }
  std::optional<std::string> receive() override { return fds_->receive(); }

 private:
  pid_t pid_;
  std::unique_ptr<FdChannel> fds_;
};

}  // namespace

FdChannel::FdChannel(int read_fd, int write_fd, bool owns_fds)
    : read_fd_(read_fd), write_fd_(write_fd), owns_(owns_fds) {}

FdChannel::~FdChannel() {
  if (!owns_) return;
  if (write_fd_ >= 0) ::close(write_fd_);
  if (read_fd_ >= 0 && read_fd_ != write_fd_) ::close(read_fd_);
}

void FdChannel::send(const std::string& line) {
  std::string data = line;
  data.push_back('\n');
  std::size_t off = 0;
  while (off < data.size()) {
    const auto n = ::send(write_fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0 && errno == ENOTSOCK) {
      const auto w = ::write(write_fd_, data.data() + off, data.size() - off);
      if (w < 0) {
        if (errno == EINTR) continue;
        throw TransportError(errno_message("bridge write"));
      }
      off += static_cast<std::size_t>(w);
      continue;
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_message("bridge send"));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> FdChannel::receive() {
  for (;;) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      auto line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    char chunk[4096];
    const auto n = ::read(read_fd_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_message("bridge read"));
    }
    if (n == 0) {
      if (buffer_.empty()) return std::nullopt;
      auto line = std::move(buffer_);
      buffer_.clear();
      return line;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::unique_ptr<LineChannel> spawn_process_channel(const std::vector<std::string>& argv) {
  if (argv.empty()) throw ConfigError("bridge command is empty");
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0) throw TransportError(errno_message("pipe"));
  if (::pipe(from_child) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw TransportError(errno_message("pipe"));
  }
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) throw TransportError(errno_message("fork"));
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  return std::make_unique<ProcessChannel>(pid, from_child[0], to_child[1]);
}

std::unique_ptr<LineChannel> connect_tcp(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const auto service = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw TransportError("resolve " + host + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  for (auto* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw TransportError("cannot connect to " + host + ":" + service);
  return std::make_unique<FdChannel>(fd, fd, true);
}

TcpListener::TcpListener(std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw TransportError(errno_message("socket"));
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(fd_, 8) != 0) {
    ::close(fd_);
    throw TransportError(errno_message("bind"));
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<LineChannel> TcpListener::accept() {
  int client = -1;
  do {
    client = ::accept(fd_, nullptr, nullptr);
  } while (client < 0 && errno == EINTR);
  if (client < 0) throw TransportError(errno_message("accept"));
  return std::make_unique<FdChannel>(client, client, true);
}

Json handle_bridge_request(Environment& env, const Json& request) {
  if (!request.is_object()) return error_response("protocol", "request must be an object");
  if (request.value("v", -1) != kBridgeProtocolVersion) {
    return error_response("version", "unsupported protocol version; expected " +
                                         std::to_string(kBridgeProtocolVersion));
  }
  const auto op = request.value("op", std::string{});
  try {
    if (op == "hello") {
      auto j = envelope("hello");
      j["protocol"] = kBridgeProtocolName;
      j["version"] = kBridgeProtocolVersion;
      return j;
    }
    if (op == "reset") {
      auto j = envelope("observation");
      j["observation"] = to_json(env.reset(request.value("seed", std::uint64_t{0})));
      return j;
    }
    if (op == "step") {
      if (!request.contains("action")) return error_response("protocol", "step without action");
      const auto result = env.step(action_from_json(request.at("action")));
      auto j = envelope(result.terminal ? "terminal" : "observation");
      j["observation"] = to_json(result.observation);
      j["no_op"] = result.no_op;
      if (result.terminal) j["answer"] = result.answer.value_or("");
      return j;
    }
    if (op == "render") {
      auto j = envelope("render");
      j["text"] = env.render();
      return j;
    }
    if (op == "bye") return envelope("bye");
    return error_response("protocol", "unknown op '" + op + "'");
  } catch (const LifecycleError& e) {
    return error_response("lifecycle", e.what());
  } catch (const ActionError& e) {
    return error_response("action", e.what());
  } catch (const ConfigError& e) {
    return error_response("config", e.what());
  } catch (const std::exception& e) {
    return error_response("protocol", e.what());
  }
}

void serve_bridge(Environment& env, LineChannel& channel) {
  while (auto line = channel.receive()) {
    if (line->empty()) continue;
    Json response;
    Json request;
    try {
      request = Json::parse(*line);
      response = handle_bridge_request(env, request);
    } catch (const Json::parse_error& e) {
      response = error_response("protocol", e.what());
    }
    channel.send(response.dump());
    if (response.value("type", std::string{}) == "bye") return;
  }
}

BridgeEnvironment::BridgeEnvironment(std::unique_ptr<LineChannel> channel)
    : channel_(std::move(channel)) {
  const auto hello = call({{"v", kBridgeProtocolVersion}, {"op", "hello"}});
  if (hello.value("type", std::string{}) != "hello" ||
      hello.value("version", -1) != kBridgeProtocolVersion) {
    throw ConfigError("bridge handshake failed: " + hello.dump());
  }
}

BridgeEnvironment::~BridgeEnvironment() {
  try {
    channel_->send(Json{{"v", kBridgeProtocolVersion}, {"op", "bye"}}.dump());
    channel_->receive();
  } catch (...) {
  }
}

Json BridgeEnvironment::call(const Json& request) const {
  channel_->send(request.dump());
  auto line = channel_->receive();
  if (!line) throw TransportError("bridge closed the connection");
  Json response;
  try {
    response = Json::parse(*line);
  } catch (const Json::parse_error& e) {
    throw TransportError(std::string("bridge sent malformed json: ") + e.what());
  }
  if (response.value("type", std::string{}) == "error") rethrow_remote(response);
  return response;
}

Observation BridgeEnvironment::reset(std::uint64_t seed) {
  const auto r = call({{"v", kBridgeProtocolVersion}, {"op", "reset"}, {"seed", seed}});
  return observation_from_json(r.at("observation"));
}

StepResult BridgeEnvironment::step(const Action& action) {
  const auto r = call({{"v", kBridgeProtocolVersion}, {"op", "step"}, {"action", to_json(action)}});
  StepResult out;
  out.observation = observation_from_json(r.at("observation"));
  out.no_op = r.value("no_op", false);
  if (r.at("type") == "terminal") {
    out.terminal = true;
    out.answer = r.value("answer", std::string{});
  }
  return out;
}

std::string BridgeEnvironment::render() const {
  return call({{"v", kBridgeProtocolVersion}, {"op", "render"}}).at("text").get<std::string>();
}

}  // namespace retrolabel
