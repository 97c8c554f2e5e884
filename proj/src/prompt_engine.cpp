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

#include "coder_forge/prompt_engine.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace coder_forge {

namespace detail {
extern const std::string_view kTemplate_brainstorm;
extern const std::string_view kTemplate_brainstorm_example;
extern const std::string_view kTemplate_generation;
extern const std::string_view kTemplate_annotation;
extern const std::string_view kTemplate_difficulty;
}  // namespace detail

namespace {

constexpr std::array<std::string_view, 2> kBrainstormSlots = {"Major Task Type", "Examples"};
constexpr std::array<std::string_view, 3> kExampleSlots = {"Example Index", "Task Name",
                                                           "Task Instruction"};
constexpr std::array<std::string_view, 4> kGenerationSlots = {
    "Generation Instruction", "Input Type", "Input Content", "Output Content"};
constexpr std::array<std::string_view, 7> kAnnotationSlots = {
    "Annotation Instruction", "Major Task Type", "Task Instruction", "Query Type",
    "Doc Type", "query", "document"};
constexpr std::array<std::string_view, 3> kDifficultySlots = {"Task Instruction", "query",
                                                              "document"};

bool is_placeholder_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == ' ';
}

void require_non_empty(std::string_view query, std::string_view document) {
  if (trim(query).empty()) throw Error("empty query");
  if (trim(document).empty()) throw Error("empty document");
}

}  // namespace

std::string_view to_string(TemplateId id) {
  switch (id) {
    case TemplateId::Brainstorm: return "brainstorm";
    case TemplateId::Generation: return "generation";
    case TemplateId::Annotation: return "annotation";
    case TemplateId::Difficulty: return "difficulty";
  }
  return "?";
}

std::string_view template_source(TemplateId id) {
  switch (id) {
    case TemplateId::Brainstorm: return detail::kTemplate_brainstorm;
    case TemplateId::Generation: return detail::kTemplate_generation;
    case TemplateId::Annotation: return detail::kTemplate_annotation;
    case TemplateId::Difficulty: return detail::kTemplate_difficulty;
  }
  return {};
}

std::string substitute_placeholders(std::string_view text, const Bindings& bindings,
                                    std::span<const std::string_view> known) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t open = text.find('{', pos);
    if (open == std::string_view::npos) break;
    const std::size_t close = text.find('}', open + 1);
    if (close == std::string_view::npos) break;
    const std::string_view name = text.substr(open + 1, close - open - 1);
    const bool is_known = std::find(known.begin(), known.end(), name) != known.end();
    if (!is_known) {
      out.append(text.substr(pos, open + 1 - pos));
      pos = open + 1;
      continue;
    }
    auto it = bindings.find(std::string(name));
    if (it == bindings.end()) {
      throw ConfigError("missing binding for placeholder {" + std::string(name) + "}");
    }
    out.append(text.substr(pos, open - pos));
    out.append(it->second);
    pos = close + 1;
  }
  out.append(text.substr(pos));
  return out;
}

std::vector<std::string> find_placeholders(std::string_view text) {
  std::vector<std::string> names;
  for (std::size_t open = text.find('{'); open != std::string_view::npos;
       open = text.find('{', open + 1)) {
    std::size_t end = open + 1;
    while (end < text.size() && is_placeholder_char(text[end])) ++end;
    if (end < text.size() && text[end] == '}' && end > open + 1) {
      names.emplace_back(text.substr(open + 1, end - open - 1));
    }
  }
  return names;
}

std::string render_task_text(std::string_view text, const Bindings& bindings) {
  return substitute_placeholders(text, bindings, kTaskPlaceholders);
}

PromptText render_brainstorm_prompt(MajorTaskType major_type, std::span<const SeedTask> seeds) {
  if (seeds.empty()) throw Error("brainstorm prompt needs at least one seed example");
  std::string examples;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i > 0) examples += "\n\n";
    const Bindings slot = {{"Example Index", std::to_string(i + 1)},
                           {"Task Name", seeds[i].name},
                           {"Task Instruction", seeds[i].instruction}};
    examples += substitute_placeholders(detail::kTemplate_brainstorm_example, slot, kExampleSlots);
  }
  PromptText prompt;
  prompt.template_id = TemplateId::Brainstorm;
  prompt.placeholder_bindings = {{"Major Task Type", std::string(to_string(major_type))},
                                 {"Examples", examples}};
  prompt.body = substitute_placeholders(detail::kTemplate_brainstorm, prompt.placeholder_bindings,
                                        kBrainstormSlots);
  return prompt;
}

PromptText render_generation_prompt(const TaskSpec& task, std::size_t step_index,
                                    std::string_view input_type_label,
                                    std::string_view input_content, const Bindings& bindings) {
  if (step_index >= task.generation_steps.size()) {
    throw Error("step index " + std::to_string(step_index) + " out of range for task '" +
                task.name + "'");
  }
  const auto& step = task.generation_steps[step_index];
  PromptText prompt;
  prompt.template_id = TemplateId::Generation;
  prompt.placeholder_bindings = {
      {"Generation Instruction", render_task_text(step.instruction_template, bindings)},
      {"Input Type", std::string(input_type_label)},
      {"Input Content", std::string(input_content)},
      {"Output Content", render_task_text(step.output_content_template, bindings)}};
  prompt.body = substitute_placeholders(detail::kTemplate_generation, prompt.placeholder_bindings,
                                        kGenerationSlots);
  return prompt;
}

PromptText render_annotation_prompt(const TaskSpec& task, std::string_view query,
                                    std::string_view document, const Bindings& bindings) {
  require_non_empty(query, document);
  PromptText prompt;
  prompt.template_id = TemplateId::Annotation;
  prompt.placeholder_bindings = {
      {"Annotation Instruction", render_task_text(task.annotation_instruction, bindings)},
      {"Major Task Type", std::string(to_string(task.major_type))},
      {"Task Instruction", render_task_text(task.task_instruction, bindings)},
      {"Query Type", task.query_type_label},
      {"Doc Type", task.doc_type_label},
      {"query", std::string(query)},
      {"document", std::string(document)}};
  prompt.body = substitute_placeholders(detail::kTemplate_annotation, prompt.placeholder_bindings,
                                        kAnnotationSlots);
  return prompt;
}

PromptText render_difficulty_prompt(const TaskSpec& task, std::string_view query,
                                    std::string_view document, const Bindings& bindings) {
  require_non_empty(query, document);
  PromptText prompt;
  prompt.template_id = TemplateId::Difficulty;
  prompt.placeholder_bindings = {
      {"Task Instruction", render_task_text(task.task_instruction, bindings)},
      {"query", std::string(query)},
      {"document", std::string(document)}};
  prompt.body = substitute_placeholders(detail::kTemplate_difficulty, prompt.placeholder_bindings,
                                        kDifficultySlots);
  return prompt;
}

InstructedQuery format_instructed_query(std::string_view task_instruction, std::string_view query) {
  InstructedQuery out;
  out.task_instruction = std::string(task_instruction);
  out.query = std::string(query);
  out.rendered.reserve(task_instruction.size() + query.size() + 20);
  out.rendered.append(kInstructMarker).append(" ").append(task_instruction);
  out.rendered.append(" ").append(kQueryMarker).append(" ").append(query);
  return out;
}

std::optional<std::pair<std::string, std::string>> split_instructed_query(std::string_view rendered) {
  const std::string prefix = std::string(kInstructMarker) + " ";
  const std::string middle = " " + std::string(kQueryMarker) + " ";
  if (rendered.substr(0, prefix.size()) != prefix) return std::nullopt;
  const std::size_t at = rendered.rfind(middle);
  if (at == std::string_view::npos || at < prefix.size()) return std::nullopt;
  return std::pair{std::string(rendered.substr(prefix.size(), at - prefix.size())),
                   std::string(rendered.substr(at + middle.size()))};
}

std::vector<SeedTask> default_seed_tasks(const Registry& registry, MajorTaskType major_type) {
  std::vector<std::string_view> names;
  switch (major_type) {
    case MajorTaskType::Text2Code:
      names = {"Web Query to Code Retrieval", "Code Contest Retrieval", "Text to SQL Retrieval"};
      break;
    case MajorTaskType::Code2Text:
      names = {"Code Summary Retrieval"};
      break;
    case MajorTaskType::Code2Code:
      names = {"Code Context Retrieval"};
      break;
    case MajorTaskType::Hybrid:
      names = {"Code Modification Retrieval"};
      break;
  }
  std::vector<SeedTask> seeds;
  for (auto name : names) {
    const auto& task = get_task(registry, name);
    seeds.push_back({task.name, task.task_instruction});
  }
  return seeds;
}

}  // namespace coder_forge
