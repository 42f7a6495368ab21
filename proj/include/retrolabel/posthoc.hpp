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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "retrolabel/roles.hpp"
#include "retrolabel/trajectory.hpp"

namespace retrolabel {

inline constexpr int kAnnotatedSchemaVersion = 2;

/// A demonstration whose every step carries instruction-aligned reasoning
/// and whose trajectory ends in stop. `calls` role-log entries under `scope`
/// (sequence numbers 0..calls-1) produced the annotation.
struct AnnotatedDemonstration {
  Demonstration demo;
  std::string scope;
  std::uint64_t calls = 0;

  Json to_json() const;
  static AnnotatedDemonstration from_json(const Json& j);

  bool operator==(const AnnotatedDemonstration&) const = default;
};

/// Broken annotated-demonstration invariants; empty means valid.
std::vector<std::string> annotation_violations(const AnnotatedDemonstration& annotated);

/// Adds reasoning to every step lacking it, then a terminal stop if missing.
/// Steps that already carry reasoning are left alone, so annotating an
/// annotated demonstration is a no-op. Role failures raise AnnotationError
/// with the failing step index.
AnnotatedDemonstration annotate(const Demonstration& demo, const LmRoles& roles);
/// Re-annotation keeps the recorded provenance when nothing was missing.
AnnotatedDemonstration annotate(const AnnotatedDemonstration& annotated, const LmRoles& roles);

struct AnnotationFailure {
  std::string demo_id;
  std::size_t step = 0;
  std::string message;

  Json to_json() const;
};

struct BatchAnnotation {
  std::vector<AnnotatedDemonstration> annotated;
  std::vector<AnnotationFailure> failures;
};

/// Annotates independently on up to `parallelism` workers; output keeps the
/// input order, failures are collected rather than thrown.
BatchAnnotation batch_annotate(std::span<const Demonstration> demos, const LmRoles& roles,
                               std::size_t parallelism);

void write_annotated(const std::filesystem::path& path,
                     std::span<const AnnotatedDemonstration> demos);
std::vector<AnnotatedDemonstration> read_annotated(const std::filesystem::path& path);

}  // namespace retrolabel
