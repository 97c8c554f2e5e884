// Copyright 2026-present the coder-forge authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coder_forge/common.hpp"
#include "coder_forge/task_registry.hpp"

namespace coder_forge {

enum class TemplateId { Brainstorm, Generation, Annotation, Difficulty };

std::string_view to_string(TemplateId id);

struct PromptText {
  std::string body;
  TemplateId template_id = TemplateId::Generation;
  Bindings placeholder_bindings;

  /// SHA-256 of the body; the key for mock fixtures and sample traces.
  std::string hash() const { return sha256_hex(body); }
};

struct SeedTask {
  std::string name;
  std::string instruction;

  bool operator==(const SeedTask&) const = default;
};

/// Replaces each `{name}` whose name is listed in `known` with its binding.
/// Single pass: substituted values are never rescanned, so code containing
/// braces is safe. A known placeholder without a binding throws ConfigError;
/// braces around unknown names are left untouched.
std::string substitute_placeholders(std::string_view text, const Bindings& bindings,
                                    std::span<const std::string_view> known);

/// Names of all `{identifier}` tokens in `text` (identifier = letters,
/// digits, underscores, spaces).
std::vector<std::string> find_placeholders(std::string_view text);

/// Renders a task-level template ({code_language}, {language}, ...).
std::string render_task_text(std::string_view text, const Bindings& bindings);

/// Raw template skeleton as shipped under templates/.
std::string_view template_source(TemplateId id);

PromptText render_brainstorm_prompt(MajorTaskType major_type, std::span<const SeedTask> seeds);

PromptText render_generation_prompt(const TaskSpec& task, std::size_t step_index,
                                    std::string_view input_type_label,
                                    std::string_view input_content, const Bindings& bindings);

PromptText render_annotation_prompt(const TaskSpec& task, std::string_view query,
                                    std::string_view document, const Bindings& bindings = {});

PromptText render_difficulty_prompt(const TaskSpec& task, std::string_view query,
                                    std::string_view document, const Bindings& bindings = {});

inline constexpr std::string_view kInstructMarker = "<instruct>";
inline constexpr std::string_view kQueryMarker = "<query>";

struct InstructedQuery {
  std::string task_instruction;
  std::string query;
  std::string rendered;
};

/// "<instruct> {t} <query> {q}" with single spaces around the markers.
InstructedQuery format_instructed_query(std::string_view task_instruction, std::string_view query);

/// Inverse of format_instructed_query; nullopt when the layout does not match.
std::optional<std::pair<std::string, std::string>> split_instructed_query(std::string_view rendered);

/// Seed tasks used for brainstorming each major type.
std::vector<SeedTask> default_seed_tasks(const Registry& registry, MajorTaskType major_type);

}  // namespace coder_forge
