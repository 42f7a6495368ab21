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

#include "retrolabel/posthoc.hpp"

#include <optional>

#include "retrolabel/error.hpp"
#include "retrolabel/jsonl.hpp"
#include "retrolabel/parallel.hpp"

namespace retrolabel {

Json AnnotatedDemonstration::to_json() const {
  auto j = retrolabel::to_json(demo);
  j["schema_version"] = kAnnotatedSchemaVersion;
  j["annotation"] = {{"scope", scope}, {"calls", calls}};
  return j;
}

AnnotatedDemonstration AnnotatedDemonstration::from_json(const Json& j) {
  if (j.value("schema_version", 0) != kAnnotatedSchemaVersion) {
    throw ParseError("not an annotated demonstration record (schema_version " +
                     std::to_string(j.value("schema_version", 0)) + ")");
  }
  AnnotatedDemonstration a;
  a.demo = demonstration_from_json(j);
  const auto& ann = j.at("annotation");
  a.scope = ann.at("scope").get<std::string>();
  a.calls = ann.at("calls").get<std::uint64_t>();
  return a;
}

std::vector<std::string> annotation_violations(const AnnotatedDemonstration& annotated) {
  std::vector<std::string> out;
  const auto& t = annotated.demo.trajectory;
  for (const auto& v : validate(t)) out.push_back(v.message);
  for (std::size_t i = 0; i < t.length(); ++i) {
    if (!t.steps[i].reasoning || t.steps[i].reasoning->text.empty()) {
      out.push_back("step " + std::to_string(i) + " has no reasoning");
    }
  }
  if (!t.ends_in_stop()) out.push_back("trajectory does not end in stop");
  if (annotated.demo.binary_reward != 1) out.push_back("binary_reward is not 1");
  return out;
}

AnnotatedDemonstration annotate(const Demonstration& demo, const LmRoles& roles) {
  if (demo.binary_reward != 1) {
    throw PreconditionError("annotate: demonstration " + demo.id() + " has binary_reward " +
                            std::to_string(demo.binary_reward));
  }
  AnnotatedDemonstration out;
  out.scope = "annotate/" + demo.id();
  out.demo = demo;
  CallScope scope(out.scope);
  auto& steps = out.demo.trajectory.steps;

  auto reason = [&](std::size_t i) {
    if (steps[i].reasoning) return;
    try {
      steps[i].reasoning =
          roles.retro_reason(out.demo.instruction, steps[i].observation, steps[i].action, scope);
    } catch (const Error& e) {
      throw AnnotationError(e.what(), i);
    }
  };

  for (std::size_t i = 0; i < steps.size(); ++i) reason(i);
  if (!out.demo.trajectory.ends_in_stop()) {
    try {
      out.demo = roles.append_stop(out.demo, scope);
    } catch (const Error& e) {
      throw AnnotationError(e.what(), steps.size());
    }
    reason(steps.size() - 1);
  }
  out.calls = scope.next_seq();
  return out;
}

AnnotatedDemonstration annotate(const AnnotatedDemonstration& annotated, const LmRoles& roles) {
  auto out = annotate(annotated.demo, roles);
  if (out.calls == 0) {
    out.scope = annotated.scope;
    out.calls = annotated.calls;
  }
  return out;
}

Json AnnotationFailure::to_json() const {
  return {{"demo_id", demo_id}, {"step", step}, {"message", message}};
}

BatchAnnotation batch_annotate(std::span<const Demonstration> demos, const LmRoles& roles,
                               std::size_t parallelism) {
  std::vector<std::optional<AnnotatedDemonstration>> done(demos.size());
  std::vector<std::optional<AnnotationFailure>> failed(demos.size());
  parallel_for(demos.size(), parallelism, [&](std::size_t i) {
    try {
      done[i] = annotate(demos[i], roles);
    } catch (const AnnotationError& e) {
      failed[i] = AnnotationFailure{demos[i].id(), e.step(), e.what()};
    } catch (const std::exception& e) {
      failed[i] = AnnotationFailure{demos[i].id(), 0, e.what()};
    }
  });
  BatchAnnotation out;
  for (std::size_t i = 0; i < demos.size(); ++i) {
    if (done[i]) out.annotated.push_back(std::move(*done[i]));
    if (failed[i]) out.failures.push_back(std::move(*failed[i]));
  }
  return out;
}

void write_annotated(const std::filesystem::path& path,
                     std::span<const AnnotatedDemonstration> demos) {
  write_jsonl(path, demos, [](const AnnotatedDemonstration& a) { return a.to_json(); });
}

std::vector<AnnotatedDemonstration> read_annotated(const std::filesystem::path& path) {
  return read_jsonl<AnnotatedDemonstration>(
      path, [](const Json& j) { return AnnotatedDemonstration::from_json(j); });
}

}  // namespace retrolabel
