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

// Serves a fixture site over the bridge protocol, on stdin/stdout or on a
// loopback TCP port (one thread per connection).

#include <unistd.h>

#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "retrolabel/bridge.hpp"
#include "retrolabel/env.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Fixture site behind the bridge protocol.", "retrolabel-env-server"};
  std::string site = "shopsim";
  std::string data_dir;
  int port = -1;
  app.add_option("--site", site, "Fixture name");
  app.add_option("--data-dir", data_dir, "Fixture directory");
  app.add_option("--port", port, "Listen on 127.0.0.1:PORT instead of stdio (0: any free port)");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto def = data_dir.empty() ? retrolabel::load_fixture(site)
                                      : retrolabel::load_fixture(site, data_dir);
    if (port < 0) {
      retrolabel::FdChannel channel(STDIN_FILENO, STDOUT_FILENO, false);
      retrolabel::FixtureEnvironment env(def);
      retrolabel::serve_bridge(env, channel);
      return 0;
    }
    retrolabel::TcpListener listener(static_cast<std::uint16_t>(port));
    std::cout << "listening on 127.0.0.1:" << listener.port() << std::endl;
    while (true) {
      std::thread([def, channel = listener.accept()]() mutable {
        retrolabel::FixtureEnvironment env(def);
        try {
          retrolabel::serve_bridge(env, *channel);
        } catch (const std::exception& e) {
          std::cerr << "connection closed: " << e.what() << "\n";
        }
      }).detach();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
