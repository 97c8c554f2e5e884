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

#include "coder_forge/task_registry.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "coder_forge/prompt_engine.hpp"

namespace coder_forge {

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view name, const std::array<std::pair<std::string_view, Enum>, N>& table,
                std::string_view what) {
  for (const auto& [text, value] : table) {
    if (text == name) return value;
  }
  throw ParseError("unknown " + std::string(what) + " '" + std::string(name) + "'");
}

template <typename Enum, std::size_t N>
std::string_view enum_name(Enum value, const std::array<std::pair<std::string_view, Enum>, N>& table) {
  for (const auto& [text, v] : table) {
    if (v == value) return text;
  }
  return "?";
}

constexpr std::array<std::pair<std::string_view, MajorTaskType>, 4> kMajorNames = {{
    {"Text2Code", MajorTaskType::Text2Code},
    {"Code2Text", MajorTaskType::Code2Text},
    {"Code2Code", MajorTaskType::Code2Code},
    {"Hybrid", MajorTaskType::Hybrid},
}};

constexpr std::array<std::pair<std::string_view, InputRole>, 5> kRoleNames = {{
    {"original_code", InputRole::OriginalCode},
    {"previous_step_output", InputRole::PreviousStepOutput},
    {"original_plus_previous", InputRole::OriginalPlusPrevious},
    {"paired_code", InputRole::PairedCode},
    {"paired_code_plus_previous", InputRole::PairedCodePlusPrevious},
}};

constexpr std::array<std::pair<std::string_view, Orientation>, 3> kOrientationNames = {{
    {"input_is_query", Orientation::InputIsQuery},
    {"output_is_query", Orientation::OutputIsQuery},
    {"input_plus_output_is_query", Orientation::InputPlusOutputIsQuery},
}};

constexpr std::array<std::pair<std::string_view, LanguageSlots>, 2> kSlotNames = {{
    {"single", LanguageSlots::Single},
    {"source_target", LanguageSlots::SourceTarget},
}};

constexpr std::array<std::pair<std::string_view, Artifact>, 4> kArtifactNames = {{
    {"input", Artifact::Input},
    {"companion", Artifact::Companion},
    {"step1", Artifact::Step1},
    {"step2", Artifact::Step2},
}};

bool uses_previous(InputRole role) {
  return role == InputRole::PreviousStepOutput || role == InputRole::OriginalPlusPrevious ||
         role == InputRole::PairedCodePlusPrevious;
}

bool uses_pair(InputRole role) {
  return role == InputRole::PairedCode || role == InputRole::PairedCodePlusPrevious;
}

std::vector<std::string> string_list(const Json& record, const char* field) {
  if (!record.contains(field)) return {};
  const Json& value = record.at(field);
  if (!value.is_array()) throw ParseError(std::string("field '") + field + "' must be an array");
  std::vector<std::string> out;
  for (const auto& item : value) out.push_back(item.get<std::string>());
  return out;
}

std::string required_string(const Json& record, const char* field) {
  if (!record.contains(field) || !record.at(field).is_string()) {
    throw ParseError(std::string("missing string field '") + field + "'");
  }
  return record.at(field).get<std::string>();
}

}  // namespace

std::string_view to_string(MajorTaskType type) { return enum_name(type, kMajorNames); }
MajorTaskType parse_major_type(std::string_view name) {
  return parse_enum(name, kMajorNames, "major task type");
}
std::string_view to_string(InputRole role) { return enum_name(role, kRoleNames); }
InputRole parse_input_role(std::string_view name) { return parse_enum(name, kRoleNames, "input role"); }
std::string_view to_string(Orientation o) { return enum_name(o, kOrientationNames); }
Orientation parse_orientation(std::string_view name) {
  return parse_enum(name, kOrientationNames, "orientation");
}
std::string_view to_string(LanguageSlots s) { return enum_name(s, kSlotNames); }
LanguageSlots parse_language_slots(std::string_view name) {
  return parse_enum(name, kSlotNames, "language slots");
}
std::string_view to_string(Artifact a) { return enum_name(a, kArtifactNames); }
Artifact parse_artifact(std::string_view name) { return parse_enum(name, kArtifactNames, "artifact"); }

bool TaskSpec::supports(std::string_view natural_language) const {
  return std::find(natural_languages.begin(), natural_languages.end(), natural_language) !=
         natural_languages.end();
}

bool TaskSpec::uses_companion() const {
  return std::any_of(generation_steps.begin(), generation_steps.end(),
                     [](const GenerationStep& s) { return uses_pair(s.input_role); });
}

std::vector<std::string> TaskSpec::required_placeholders() const {
  std::set<std::string> names;
  auto collect = [&](std::string_view text) {
    for (auto& n : find_placeholders(text)) names.insert(std::move(n));
  };
  collect(task_instruction);
  for (const auto& step : generation_steps) {
    collect(step.instruction_template);
    collect(step.output_content_template);
  }
  return {names.begin(), names.end()};
}

std::vector<Artifact> default_query_from(Orientation orientation, std::size_t steps) {
  const Artifact last = steps >= 2 ? Artifact::Step2 : Artifact::Step1;
  switch (orientation) {
    case Orientation::InputIsQuery:
      return {Artifact::Input};
    case Orientation::OutputIsQuery:
      return {last};
    case Orientation::InputPlusOutputIsQuery:
      return steps >= 2 ? std::vector<Artifact>{Artifact::Input, Artifact::Step1}
                        : std::vector<Artifact>{Artifact::Input};
  }
  return {};
}

std::vector<Artifact> default_positive_from(Orientation orientation, std::size_t steps) {
  const Artifact last = steps >= 2 ? Artifact::Step2 : Artifact::Step1;
  if (orientation == Orientation::OutputIsQuery) return {Artifact::Input};
  return {last};
}

Registry::Registry(std::vector<TaskSpec> tasks, std::vector<std::string> programming_languages)
    : tasks_(std::move(tasks)), languages_(std::move(programming_languages)) {
  for (std::size_t i = 0; i < tasks_.size(); ++i) by_name_.emplace(tasks_[i].name, i);
}

const TaskSpec* Registry::find(std::string_view name) const noexcept {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : &tasks_[it->second];
}

bool Registry::has_language(std::string_view language) const noexcept {
  return std::find(languages_.begin(), languages_.end(), language) != languages_.end();
}

TaskSpec task_from_json(const Json& record) {
  if (!record.is_object()) throw ParseError("task record must be a JSON object");
  TaskSpec task;
  task.name = required_string(record, "task_name");
  task.major_type = parse_major_type(required_string(record, "major_type"));
  task.task_instruction = required_string(record, "task_instruction");
  task.annotation_instruction = required_string(record, "annotation_instruction");
  task.query_type_label = required_string(record, "query_type");
  task.doc_type_label = required_string(record, "doc_type");
  task.orientation = parse_orientation(required_string(record, "orientation"));
  task.natural_languages = string_list(record, "natural_languages");
  task.programming_language_slots =
      parse_language_slots(record.value("language_slots", std::string("single")));

  const auto steps = string_list(record, "generation_steps");
  const auto outputs = string_list(record, "output_contents");
  const auto roles = string_list(record, "input_roles");
  const auto types = string_list(record, "input_types");
  if (outputs.size() != steps.size()) {
    throw ParseError("task '" + task.name + "': output_contents must match generation_steps");
  }
  if ((!roles.empty() && roles.size() != steps.size()) ||
      (!types.empty() && types.size() != steps.size())) {
    throw ParseError("task '" + task.name + "': input_roles/input_types must match generation_steps");
  }
  for (std::size_t i = 0; i < steps.size(); ++i) {
    GenerationStep step;
    step.instruction_template = steps[i];
    step.output_content_template = outputs[i];
    // Without explicit roles, later steps chain on the original plus the
    // previous output.
    if (!roles.empty()) {
      step.input_role = parse_input_role(roles[i]);
    } else {
      step.input_role = i == 0 ? InputRole::OriginalCode : InputRole::OriginalPlusPrevious;
    }
    if (!types.empty()) step.input_type = types[i];
    task.generation_steps.push_back(std::move(step));
  }

  const auto query_from = string_list(record, "query_from");
  const auto positive_from = string_list(record, "positive_from");
  for (const auto& a : query_from) task.query_from.push_back(parse_artifact(a));
  for (const auto& a : positive_from) task.positive_from.push_back(parse_artifact(a));
  if (task.query_from.empty()) {
    task.query_from = default_query_from(task.orientation, task.generation_steps.size());
  }
  if (task.positive_from.empty()) {
    task.positive_from = default_positive_from(task.orientation, task.generation_steps.size());
  }
  return task;
}

Json task_to_json(const TaskSpec& task) {
  Json steps = Json::array(), outputs = Json::array(), roles = Json::array(), types = Json::array();
  for (const auto& s : task.generation_steps) {
    steps.push_back(s.instruction_template);
    outputs.push_back(s.output_content_template);
    roles.push_back(to_string(s.input_role));
    types.push_back(s.input_type);
  }
  Json query_from = Json::array(), positive_from = Json::array();
  for (auto a : task.query_from) query_from.push_back(to_string(a));
  for (auto a : task.positive_from) positive_from.push_back(to_string(a));
  return Json{{"task_name", task.name},
              {"major_type", to_string(task.major_type)},
              {"task_instruction", task.task_instruction},
              {"generation_steps", steps},
              {"output_contents", outputs},
              {"input_roles", roles},
              {"input_types", types},
              {"annotation_instruction", task.annotation_instruction},
              {"query_type", task.query_type_label},
              {"doc_type", task.doc_type_label},
              {"orientation", to_string(task.orientation)},
              {"natural_languages", task.natural_languages},
              {"language_slots", to_string(task.programming_language_slots)},
              {"query_from", query_from},
              {"positive_from", positive_from}};
}

ValidationReport validate_registry(const Registry& registry, LoadOptions options) {
  ValidationReport report;
  auto& issues = report.issues;
  for (auto type : kMajorTaskTypes) report.type_counts[type] = 0;

  std::set<std::string> seen;
  for (const auto& task : registry.tasks()) {
    report.type_counts[task.major_type]++;
    report.tasks.push_back(
        {task.name, task.major_type, task.natural_languages, task.programming_language_slots});
    const std::string who = "task '" + task.name + "'";

    if (!seen.insert(task.name).second) issues.push_back("duplicate task name: " + task.name);
    if (task.name.empty()) issues.push_back("task with empty name");
    if (task.task_instruction.empty() || task.annotation_instruction.empty() ||
        task.query_type_label.empty() || task.doc_type_label.empty()) {
      issues.push_back(who + " has an empty instruction or type label");
    }

    if (task.natural_languages.empty()) issues.push_back(who + " lists no natural language");
    for (const auto& nl : task.natural_languages) {
      if (std::find(kNaturalLanguages.begin(), kNaturalLanguages.end(), nl) == kNaturalLanguages.end()) {
        issues.push_back(who + " has unsupported natural language '" + nl + "'");
      }
    }
    if (task.major_type == MajorTaskType::Code2Code &&
        (task.natural_languages.size() != 1 || task.natural_languages.front() != "English")) {
      issues.push_back(who + ": Code2Code tasks must be English-only");
    }

    const auto& steps = task.generation_steps;
    if (steps.empty() || steps.size() > 2) {
      issues.push_back(who + " must have 1 or 2 generation steps");
    }
    if (!steps.empty() && uses_previous(steps.front().input_role)) {
      issues.push_back(who + ": first step cannot consume a previous step output");
    }

    for (const auto& name : task.required_placeholders()) {
      if (std::find(kTaskPlaceholders.begin(), kTaskPlaceholders.end(), name) ==
          kTaskPlaceholders.end()) {
        issues.push_back(who + " uses unknown placeholder {" + name + "}");
      }
    }
    const auto placeholders = task.required_placeholders();
    auto uses = [&](std::string_view n) {
      return std::find(placeholders.begin(), placeholders.end(), n) != placeholders.end();
    };
    if (task.programming_language_slots == LanguageSlots::SourceTarget) {
      if (uses("code_language")) issues.push_back(who + ": source_target task uses {code_language}");
    } else if (uses("src_code_language") || uses("tgt_code_language")) {
      issues.push_back(who + ": single-language task uses source/target placeholders");
    }

    auto check_artifacts = [&](const std::vector<Artifact>& artifacts, const char* side) {
      if (artifacts.empty()) issues.push_back(who + " has an empty " + side + " composition");
      for (auto a : artifacts) {
        if (a == Artifact::Step2 && steps.size() < 2) {
          issues.push_back(who + ": " + side + " references step2 of a one-step task");
        }
        if (a == Artifact::Companion && !task.uses_companion()) {
          issues.push_back(who + ": " + side + " references a companion document no step consumes");
        }
      }
    };
    check_artifacts(task.query_from, "query");
    check_artifacts(task.positive_from, "positive");

    // Every template must render completely with dummy bindings.
    Bindings dummy;
    for (auto n : kTaskPlaceholders) dummy.emplace(std::string(n), "X");
    std::vector<std::string_view> texts = {task.task_instruction, task.annotation_instruction};
    for (const auto& s : steps) {
      texts.push_back(s.instruction_template);
      texts.push_back(s.output_content_template);
    }
    for (auto text : texts) {
      const std::string rendered = render_task_text(text, dummy);
      for (auto n : kTaskPlaceholders) {
        if (rendered.find("{" + std::string(n) + "}") != std::string::npos) {
          issues.push_back(who + " leaves a residual placeholder after rendering");
        }
      }
    }
  }

  if (options.expect_reference_counts) {
    if (registry.tasks().size() != kExpectedTaskCount) {
      issues.push_back("task count mismatch: " + std::to_string(registry.tasks().size()) +
                       " tasks, expected " + std::to_string(kExpectedTaskCount));
    }
    for (std::size_t i = 0; i < kMajorTaskTypes.size(); ++i) {
      const auto type = kMajorTaskTypes[i];
      if (report.type_counts[type] != kExpectedTypeCounts[i]) {
        issues.push_back("task count mismatch for " + std::string(to_string(type)) + ": " +
                         std::to_string(report.type_counts[type]) + ", expected " +
                         std::to_string(kExpectedTypeCounts[i]));
      }
    }
  }

  const auto& langs = registry.programming_languages();
  if (langs.size() != kExpectedLanguageCount) {
    issues.push_back("expected 20 languages, found " + std::to_string(langs.size()));
  }
  std::set<std::string> unique_langs(langs.begin(), langs.end());
  if (unique_langs.size() != langs.size()) issues.push_back("duplicate programming language");
  return report;
}

Json ValidationReport::to_json() const {
  Json counts = Json::object();
  for (const auto& [type, n] : type_counts) counts[std::string(to_string(type))] = n;
  Json tasks_json = Json::array();
  for (const auto& t : tasks) {
    tasks_json.push_back({{"task_name", t.name},
                          {"major_type", to_string(t.major_type)},
                          {"natural_languages", t.natural_languages},
                          {"language_slots", to_string(t.programming_language_slots)}});
  }
  return Json{{"ok", ok()}, {"type_counts", counts}, {"issues", issues}, {"tasks", tasks_json}};
}

Registry read_registry(const std::filesystem::path& tasks_path,
                       std::optional<std::filesystem::path> languages_path) {
  std::vector<TaskSpec> tasks;
  for_each_jsonl(tasks_path, [&](const Json& record, std::size_t line) {
    try {
      tasks.push_back(task_from_json(record));
    } catch (const ParseError& e) {
      if (e.line() != 0) throw;
      throw ParseError(tasks_path.filename().string() + ": " + e.what(), line);
    }
  });

  const auto lang_path = languages_path.value_or(tasks_path.parent_path() / "languages.txt");
  std::ifstream in(lang_path);
  if (!in) throw NotFoundError("cannot open language list " + lang_path.string());
  std::vector<std::string> languages;
  for (std::string line; std::getline(in, line);) {
    auto name = trim(line);
    if (!name.empty() && name.front() != '#') languages.emplace_back(name);
  }

  return Registry(std::move(tasks), std::move(languages));
}

Registry load_registry(const std::filesystem::path& tasks_path,
                       std::optional<std::filesystem::path> languages_path, LoadOptions options) {
  Registry registry = read_registry(tasks_path, std::move(languages_path));
  const auto report = validate_registry(registry, options);
  if (!report.ok()) {
    std::string msg = "invalid registry " + tasks_path.string() + ":";
    for (const auto& issue : report.issues) msg += "\n  " + issue;
    throw ConfigError(msg);
  }
  return registry;
}

Registry load_default_registry() {
  const auto dir = default_data_dir() / "registry";
  return load_registry(dir / "tasks.jsonl", dir / "languages.txt");
}

const TaskSpec& get_task(const Registry& registry, std::string_view name) {
  if (const auto* task = registry.find(name)) return *task;
  throw NotFoundError("unknown task '" + std::string(name) + "'");
}

}  // namespace coder_forge
