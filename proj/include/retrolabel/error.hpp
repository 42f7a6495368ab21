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

#include <stdexcept>
#include <string>

namespace retrolabel {

/// Base class for every error raised by the library. Subclasses map onto the
/// error categories of the individual stages so callers (and the CLI exit
/// code table) can dispatch on type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RangeError : public Error {
  using Error::Error;
};

class PreconditionError : public Error {
  using Error::Error;
};

class ConfigError : public Error {
  using Error::Error;
};

class LifecycleError : public Error {
  using Error::Error;
};

class ActionError : public Error {
  using Error::Error;
};

class LookupError : public Error {
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// A transport could not produce a reply (network failure, exhausted retries).
class TransportError : public Error {
  using Error::Error;
};

/// Replay transport was asked for a prompt that is not in its script.
class ReplayMissError : public TransportError {
  using TransportError::TransportError;
};

/// A role reply could not be parsed into the role's value after all retries.
class RoleError : public Error {
  using Error::Error;
};

class AnnotationError : public Error {
 public:
  AnnotationError(const std::string& what, std::size_t step)
      : Error("step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

class ExportError : public Error {
 public:
  ExportError(const std::string& what, std::size_t step)
      : Error("step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

class EvalError : public Error {
  using Error::Error;
};

class PairingError : public Error {
  using Error::Error;
};

class TypeError : public Error {
  using Error::Error;
};

}  // namespace retrolabel
