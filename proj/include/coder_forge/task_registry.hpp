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

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coder_forge/common.hpp"

namespace coder_forge {

enum class MajorTaskType { Text2Code, Code2Text, Code2Code, Hybrid };

inline constexpr std::array<MajorTaskType, 4> kMajorTaskTypes = {
    MajorTaskType::Text2Code, MajorTaskType::Code2Text, MajorTaskType::Code2Code,
    MajorTaskType::Hybrid};

std::string_view to_string(MajorTaskType type);
MajorTaskType parse_major_type(std::string_view name);

/// What a generation step receives as {Input Content}.
enum class InputRole {
  OriginalCode,
  PreviousStepOutput,
  OriginalPlusPrevious,
  PairedCode,              // companion document, then the sampled document
  PairedCodePlusPrevious,  // both documents, then the previous step output
};

std::string_view to_string(InputRole role);
InputRole parse_input_role(std::string_view name);

/// Which side of a generation becomes the query.
enum class Orientation { InputIsQuery, OutputIsQuery, InputPlusOutputIsQuery };

std::string_view to_string(Orientation orientation);
Orientation parse_orientation(std::string_view name);

enum class LanguageSlots { Single, SourceTarget };

std::string_view to_string(LanguageSlots slots);
LanguageSlots parse_language_slots(std::string_view name);

/// Texts a query or positive can be composed from.
enum class Artifact { Input, Companion, Step1, Step2 };

std::string_view to_string(Artifact artifact);
Artifact parse_artifact(std::string_view name);

/// Placeholders a task-level template may use.
inline constexpr std::array<std::string_view, 4> kTaskPlaceholders = {
    "code_language", "src_code_language", "tgt_code_language", "language"};

inline constexpr std::array<std::string_view, 2> kNaturalLanguages = {"English", "Chinese"};

inline constexpr std::size_t kExpectedTaskCount = 47;
inline constexpr std::size_t kExpectedLanguageCount = 20;

/// Expected number of tasks per major type, in kMajorTaskTypes order.
inline constexpr std::array<std::size_t, 4> kExpectedTypeCounts = {10, 10, 18, 9};

struct GenerationStep {
  std::string instruction_template;
  std::string output_content_template;
  InputRole input_role = InputRole::OriginalCode;
  std::string input_type = "Code";

  bool operator==(const GenerationStep&) const = default;
};

struct TaskSpec {
  std::string name;
  MajorTaskType major_type = MajorTaskType::Text2Code;
  std::string task_instruction;
  std::vector<GenerationStep> generation_steps;
  std::string annotation_instruction;
  std::string query_type_label;
  std::string doc_type_label;
  Orientation orientation = Orientation::InputIsQuery;
  std::vector<std::string> natural_languages;
  LanguageSlots programming_language_slots = LanguageSlots::Single;
  std::vector<Artifact> query_from;
  std::vector<Artifact> positive_from;

  bool supports(std::string_view natural_language) const;
  /// True when some step consumes a companion document.
  bool uses_companion() const;
  /// Task-level placeholders appearing in any of this task's templates.
  std::vector<std::string> required_placeholders() const;

  bool operator==(const TaskSpec&) const = default;
};

/// Query/positive composition implied by the orientation when the registry
/// record does not override it.
std::vector<Artifact> default_query_from(Orientation orientation, std::size_t steps);
std::vector<Artifact> default_positive_from(Orientation orientation, std::size_t steps);

/// Immutable after construction; safe to share across threads.
class Registry {
 public:
  Registry() = default;
  Registry(std::vector<TaskSpec> tasks, std::vector<std::string> programming_languages);

  const std::vector<TaskSpec>& tasks() const noexcept { return tasks_; }
  const std::vector<std::string>& programming_languages() const noexcept { return languages_; }

  const TaskSpec* find(std::string_view name) const noexcept;
  bool has_language(std::string_view language) const noexcept;

  bool operator==(const Registry& other) const {
    return tasks_ == other.tasks_ && languages_ == other.languages_;
  }

 private:
  std::vector<TaskSpec> tasks_;
  std::vector<std::string> languages_;
  std::map<std::string, std::size_t, std::less<>> by_name_;
};

struct LoadOptions {
  /// Enforce the 10/10/18/9 task split. Disable to load an extended registry.
  bool expect_reference_counts = true;
};

/// Loads tasks from a JSON-lines file. The language list defaults to
/// `languages.txt` next to the tasks file. Throws ParseError on schema
/// problems and ConfigError when the registry fails validation.
Registry load_registry(const std::filesystem::path& tasks_path,
                       std::optional<std::filesystem::path> languages_path = std::nullopt,
                       LoadOptions options = {});

/// Parses the files without validating; pair with validate_registry.
Registry read_registry(const std::filesystem::path& tasks_path,
                       std::optional<std::filesystem::path> languages_path = std::nullopt);

/// The bundled 47-task registry.
Registry load_default_registry();

/// Throws NotFoundError for unknown names.
const TaskSpec& get_task(const Registry& registry, std::string_view name);

struct TaskApplicability {
  std::string name;
  MajorTaskType major_type;
  std::vector<std::string> natural_languages;
  LanguageSlots programming_language_slots;
};

struct ValidationReport {
  std::map<MajorTaskType, std::size_t> type_counts;
  std::vector<TaskApplicability> tasks;
  std::vector<std::string> issues;

  bool ok() const noexcept { return issues.empty(); }
  Json to_json() const;
};

ValidationReport validate_registry(const Registry& registry, LoadOptions options = {});

TaskSpec task_from_json(const Json& record);
Json task_to_json(const TaskSpec& task);

}  // namespace coder_forge
