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

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "retrolabel/error.hpp"
#include "retrolabel/trajectory.hpp"

namespace retrolabel {

/// Writes one compact JSON document per line. Throws Error if the file
/// cannot be opened.
template <typename Range, typename ToJson>
void write_jsonl(const std::filesystem::path& path, const Range& items, ToJson&& to_json_fn) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& item : items) out << to_json_fn(item).dump() << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

/// Reads newline-delimited JSON, skipping blank lines. Malformed JSON and
/// conversion failures raise ParseError carrying the 1-based line number.
template <typename T, typename FromJson>
std::vector<T> read_jsonl(const std::filesystem::path& path, FromJson&& from_json_fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<T> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(from_json_fn(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw ParseError(path.filename().string() + ": " + e.what(), lineno);
    } catch (const ParseError& e) {
      throw ParseError(path.filename().string() + ": " + e.what(), lineno);
    } catch (const Error& e) {
      throw ParseError(path.filename().string() + ": " + e.what(), lineno);
    }
  }
  return out;
}

}  // namespace retrolabel
