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

#include "coder_forge/synth_pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "coder_forge/prompt_engine.hpp"

namespace coder_forge {

namespace {

constexpr std::string_view kJoin = "\n\n";

std::string join_texts(std::initializer_list<std::string_view> parts) {
  std::string out;
  for (auto p : parts) {
    if (!out.empty()) out.append(kJoin);
    out.append(p);
  }
  return out;
}

std::string cell_key(std::string_view task, std::string_view nl,
                     const std::vector<std::string>& languages) {
  std::string key = std::string(task) + "|" + std::string(nl);
  for (const auto& l : languages) key += "|" + l;
  return key;
}

}  // namespace

LanguagePair parse_language_pair(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
    throw ConfigError("language pair must look like src:tgt, got '" + std::string(text) + "'");
  }
  return {std::string(trim(text.substr(0, colon))), std::string(trim(text.substr(colon + 1)))};
}

void SynthesisConfig::validate(const Registry& registry) const {
  if (task_names.empty()) throw ConfigError("no tasks selected");
  if (samples_per_cell == 0) throw ConfigError("samples per cell must be at least 1");
  if (attempt_cap_factor == 0) throw ConfigError("attempt cap factor must be at least 1");
  if (max_output_tokens <= 0) throw ConfigError("max output tokens must be positive");
  if (natural_languages.empty()) throw ConfigError("no natural languages selected");
  for (const auto& nl : natural_languages) {
    if (std::find(kNaturalLanguages.begin(), kNaturalLanguages.end(), nl) == kNaturalLanguages.end()) {
      throw ConfigError("unsupported natural language '" + nl + "'");
    }
  }
  for (const auto& pl : programming_languages) {
    if (!registry.has_language(pl)) throw ConfigError("unknown programming language '" + pl + "'");
  }
  for (const auto& p : translation_pairs) {
    if (!registry.has_language(p.source)) throw ConfigError("unknown programming language '" + p.source + "'");
    if (!registry.has_language(p.target)) throw ConfigError("unknown programming language '" + p.target + "'");
    if (p.source == p.target) throw ConfigError("translation pair needs distinct languages: " + p.source);
  }
  for (const auto& name : task_names) {
    const auto* task = registry.find(name);
    if (!task) throw ConfigError("unknown task '" + name + "'");
    if (task->programming_language_slots == LanguageSlots::SourceTarget) {
      if (translation_pairs.empty()) {
        throw ConfigError("task '" + name + "' needs at least one --pair src:tgt");
      }
    } else if (programming_languages.empty()) {
      throw ConfigError("task '" + name + "' needs at least one programming language");
    }
  }
}

TaskStats& TaskStats::operator+=(const TaskStats& o) {
  generated += o.generated;
  accepted += o.accepted;
  rejected += o.rejected;
  malformed += o.malformed;
  failed += o.failed;
  return *this;
}

namespace {

Json stats_json(const TaskStats& s) {
  return {{"generated", s.generated},
          {"accepted", s.accepted},
          {"rejected", s.rejected},
          {"malformed", s.malformed},
          {"failed", s.failed}};
}

}  // namespace

Json SynthesisStats::to_json() const {
  Json j = stats_json(totals);
  j["resumed_accepted"] = resumed_accepted;
  j["short_cells"] = short_cells;
  j["per_task"] = Json::object();
  for (const auto& [name, s] : per_task) j["per_task"][name] = stats_json(s);
  return j;
}

std::string checkpoint_key(std::string_view task_name, std::string_view target_language,
                           std::string_view doc_id, std::string_view natural_language) {
  std::string task(task_name);
  if (!target_language.empty()) task += "/" + std::string(target_language);
  return sha256_hex(task + "|" + std::string(doc_id) + "|" + std::string(natural_language));
}

const CodeDocument* pick_companion(std::span<const CodeDocument> corpus, const CodeDocument& doc,
                                   std::string_view task_name, std::uint64_t seed) {
  std::vector<const CodeDocument*> same;
  std::unordered_set<std::string_view> seen;
  for (const auto& d : corpus) {
    if (d.programming_language == doc.programming_language && d.id != doc.id &&
        seen.insert(d.id).second) {
      same.push_back(&d);
    }
  }
  if (same.empty()) return nullptr;
  std::sort(same.begin(), same.end(),
            [](const CodeDocument* a, const CodeDocument* b) { return a->id < b->id; });
  const auto pick = derive_seed(seed, std::string(task_name) + "|companion|" + doc.id);
  return same[pick % same.size()];
}

// ---------------------------------------------------------------------------
// SynthesisPipeline
// ---------------------------------------------------------------------------

SynthesisPipeline::SynthesisPipeline(const Registry& registry, Gateway& gateway,
                                     const NegativeMiner* miner, SynthesisConfig config)
    : registry_(registry), gateway_(gateway), miner_(miner), config_(std::move(config)) {}

QueryPositivePair SynthesisPipeline::generate_pair(const GenerationRequest& r) const {
  if (!r.task || !r.doc) throw Error("generation request needs a task and a document");
  const TaskSpec& task = *r.task;
  const CodeDocument& doc = *r.doc;
  if (task.uses_companion() && !r.companion) {
    throw Error("task '" + task.name + "' needs a companion document");
  }

  QueryPositivePair pair;
  pair.task_name = task.name;
  pair.instruction = render_task_text(task.task_instruction, r.bindings);
  pair.natural_language = r.natural_language;
  pair.programming_languages = r.programming_languages;
  pair.bindings = r.bindings;
  pair.source_doc_id = doc.id;
  if (r.companion) pair.companion_doc_id = r.companion->id;

  const std::string companion = r.companion ? r.companion->content : std::string();
  std::vector<std::string> outputs;
  for (std::size_t i = 0; i < task.generation_steps.size(); ++i) {
    const auto& step = task.generation_steps[i];
    const std::string_view prev = i > 0 ? std::string_view(outputs.back()) : std::string_view();
    std::string input;
    switch (step.input_role) {
      case InputRole::OriginalCode: input = doc.content; break;
      case InputRole::PreviousStepOutput: input = std::string(prev); break;
      case InputRole::OriginalPlusPrevious: input = join_texts({doc.content, prev}); break;
      case InputRole::PairedCode: input = join_texts({companion, doc.content}); break;
      case InputRole::PairedCodePlusPrevious: input = join_texts({companion, doc.content, prev}); break;
    }
    CompletionRequest req;
    req.prompt = render_generation_prompt(task, i, step.input_type, input, r.bindings);
    req.model_name = config_.model;
    req.temperature = config_.generation_temperature;
    req.max_output_tokens = config_.max_output_tokens;
    req.seed = derive_seed(config_.seed, task.name + "|" + doc.id + "|" + r.natural_language +
                                             "|step" + std::to_string(i + 1));
    req.correlation_id = task.name + "/" + doc.id + "/step" + std::to_string(i + 1);
    const auto completion = gateway_.complete(req);
    pair.trace.push_back({"generation:" + std::to_string(i + 1), req.prompt.hash(), completion.text});
    const auto text = trim(completion.text);
    if (text.empty()) {
      throw Error("empty model output at step " + std::to_string(i + 1) + " of '" + task.name + "'");
    }
    outputs.emplace_back(text);
  }

  auto artifact = [&](Artifact a) -> std::string_view {
    switch (a) {
      case Artifact::Input: return doc.content;
      case Artifact::Companion: return companion;
      case Artifact::Step1: return outputs.at(0);
      case Artifact::Step2: return outputs.at(1);
    }
    return {};
  };
  auto compose = [&](const std::vector<Artifact>& parts) {
    std::string out;
    for (auto a : parts) {
      if (!out.empty()) out.append(kJoin);
      out.append(artifact(a));
    }
    return out;
  };
  pair.query = compose(task.query_from);
  pair.positive = compose(task.positive_from);
  if (pair.positive == doc.content) {
    pair.positive_id = doc.id;
  } else if (r.companion && pair.positive == r.companion->content) {
    pair.positive_id = r.companion->id;
  } else {
    pair.positive_id = text_id(pair.positive);
  }
  return pair;
}

void SynthesisPipeline::annotate_pair(QueryPositivePair& pair, const TaskSpec& task) const {
  CompletionRequest req;
  req.prompt = render_annotation_prompt(task, pair.query, pair.positive, pair.bindings);
  req.model_name = config_.model;
  req.temperature = config_.judge_temperature;
  req.max_output_tokens = config_.max_output_tokens;
  req.seed = derive_seed(config_.seed, "annotation|" + req.prompt.hash());
  req.correlation_id = pair.task_name + "/" + pair.source_doc_id + "/annotation";
  auto completion = gateway_.complete(req);
  pair.trace.push_back({"annotation", req.prompt.hash(), completion.text});
  pair.label = parse_annotation(completion.text);
  if (*pair.label == AnnotationLabel::Malformed && config_.retry_malformed) {
    req.attempt = 1;
    completion = gateway_.complete(req);
    pair.trace.push_back({"annotation:retry", req.prompt.hash(), completion.text});
    pair.label = parse_annotation(completion.text);
  }
  if (*pair.label == AnnotationLabel::Malformed) {
    spdlog::warn("malformed annotation for {} on {}: treated as reject", pair.task_name,
                 pair.source_doc_id);
  }
}

SynthesisPipeline::ItemOutcome SynthesisPipeline::process(const GenerationRequest& request) const {
  ItemOutcome out;
  try {
    out.pair = generate_pair(request);
    annotate_pair(out.pair, *request.task);
    if (out.pair.label == AnnotationLabel::Accept && miner_) {
      out.sample = assemble_sample(out.pair, *miner_);
      check_sample(*out.sample, miner_->config().k_negatives);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    out.error = e.what();
  }
  return out;
}

SynthesisStats SynthesisPipeline::run(std::span<const CodeDocument> corpus) {
  config_.validate(registry_);
  if (config_.output.empty()) throw ConfigError("no output path");
  const auto ckpt_path = config_.checkpoint.value_or(
      std::filesystem::path(config_.output.string() + ".ckpt"));

  SynthesisStats stats;
  std::unordered_set<std::string> done;
  std::unordered_map<std::string, std::size_t> accepted_by_cell;
  const bool resuming = config_.resume && std::filesystem::exists(config_.output);
  if (resuming) {
    if (std::ifstream in(ckpt_path); in) {
      for (std::string line; std::getline(in, line);) {
        if (!trim(line).empty()) done.insert(std::string(trim(line)));
      }
    }
    for_each_jsonl(config_.output, [&](const Json& record, std::size_t) {
      if (record.value("label", std::string{}) != "accept") return;
      ++accepted_by_cell[cell_key(record.at("task_name").get<std::string>(),
                                  record.at("natural_language").get<std::string>(),
                                  record.at("programming_languages").get<std::vector<std::string>>())];
      ++stats.resumed_accepted;
    });
    spdlog::info("resuming: {} checkpointed items, {} accepted samples on disk", done.size(),
                 stats.resumed_accepted);
  }
  const auto mode = resuming ? WriteMode::Append : WriteMode::Truncate;
  JsonlWriter out(config_.output, mode);
  JsonlWriter ckpt(ckpt_path, mode);

  for (const auto& task_name : config_.task_names) {
    const TaskSpec& task = get_task(registry_, task_name);
    auto& task_stats = stats.per_task[task.name];
    for (const auto& nl : config_.natural_languages) {
      if (!task.supports(nl)) {
        spdlog::info("skipping {} in {}: not supported", task.name, nl);
        continue;
      }
      std::vector<std::pair<std::vector<std::string>, Bindings>> cells;
      if (task.programming_language_slots == LanguageSlots::SourceTarget) {
        for (const auto& p : config_.translation_pairs) {
          cells.push_back({{p.source, p.target},
                           {{"src_code_language", p.source}, {"tgt_code_language", p.target}, {"language", nl}}});
        }
      } else {
        for (const auto& pl : config_.programming_languages) {
          cells.push_back({{pl}, {{"code_language", pl}, {"language", nl}}});
        }
      }
      for (const auto& [languages, bindings] : cells) {
        const std::string key = cell_key(task.name, nl, languages);
        const std::string target = languages.size() > 1 ? languages[1] : std::string();
        std::size_t accepted = accepted_by_cell[key];
        if (accepted >= config_.samples_per_cell) continue;

        SampleResult candidates;
        try {
          candidates = sample_documents(corpus, config_.samples_per_cell * config_.attempt_cap_factor,
                                        languages.front(), derive_seed(config_.seed, key));
        } catch (const NotFoundError& e) {
          spdlog::warn("cell {}: {}", key, e.what());
          ++stats.short_cells;
          continue;
        }
        std::vector<const CodeDocument*> pending;
        for (const auto& d : candidates.documents) {
          if (!done.count(checkpoint_key(task.name, target, d.id, nl))) pending.push_back(&d);
        }

        std::size_t next = 0;
        while (accepted < config_.samples_per_cell && next < pending.size()) {
          const std::size_t batch = std::min(config_.samples_per_cell - accepted, pending.size() - next);
          std::vector<GenerationRequest> requests(batch);
          for (std::size_t i = 0; i < batch; ++i) {
            auto& req = requests[i];
            req.task = &task;
            req.doc = pending[next + i];
            req.natural_language = nl;
            req.programming_languages = languages;
            req.bindings = bindings;
            if (task.uses_companion()) req.companion = pick_companion(corpus, *req.doc, task.name, config_.seed);
          }
          std::vector<ItemOutcome> outcomes(batch);
          parallel_for(batch, config_.jobs, [&](std::size_t i) { outcomes[i] = process(requests[i]); });

          for (std::size_t i = 0; i < batch; ++i) {
            auto& o = outcomes[i];
            TaskStats item;
            if (!o.error.empty()) {
              spdlog::error("{} on {}: {}", task.name, requests[i].doc->id, o.error);
              item.failed = 1;
            } else {
              item.generated = 1;
              switch (*o.pair.label) {
                case AnnotationLabel::Accept: item.accepted = 1; break;
                case AnnotationLabel::Reject: item.rejected = 1; break;
                case AnnotationLabel::Malformed: item.malformed = 1; break;
              }
              if (item.accepted) {
                out.write(o.sample ? sample_to_json(*o.sample) : pair_to_json(o.pair));
                ++accepted;
              }
              ckpt.write_line(checkpoint_key(task.name, target, requests[i].doc->id, nl));
            }
            task_stats += item;
            stats.totals += item;
          }
          out.flush();
          ckpt.flush();
          next += batch;
        }
        if (accepted < config_.samples_per_cell) {
          spdlog::warn("cell {}: {} of {} accepted after {} candidates", key, accepted,
                       config_.samples_per_cell, candidates.documents.size());
          ++stats.short_cells;
        }
      }
    }
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Brainstorming
// ---------------------------------------------------------------------------

BrainstormResult brainstorm_tasks(MajorTaskType major_type, std::span<const SeedTask> seeds,
                                  const Registry& registry, Gateway& gateway,
                                  std::span<const std::string> models, double temperature) {
  if (models.empty()) throw ConfigError("brainstorming needs at least one model");
  const PromptText prompt = render_brainstorm_prompt(major_type, seeds);
  std::set<std::string> known;
  for (const auto& t : registry.tasks()) known.insert(to_lower(t.name));

  BrainstormResult result;
  for (const auto& model : models) {
    CompletionRequest req;
    req.prompt = prompt;
    req.model_name = model;
    req.temperature = temperature;
    req.correlation_id = "brainstorm/" + model;
    try {
      const auto parsed = parse_brainstorm(gateway.complete(req).text);
      for (const auto& c : parsed) {
        const std::string lower = to_lower(trim(c.name));
        const bool dup = !known.insert(lower).second;
        result.candidates.push_back({model, c.name, c.instruction, dup});
      }
    } catch (const Error& e) {
      spdlog::error("brainstorm with model {} failed: {}", model, e.what());
      result.failures[model] = e.what();
    }
  }
  return result;
}

void write_brainstorm_review(const BrainstormResult& result, MajorTaskType major_type,
                             const std::filesystem::path& path) {
  JsonlWriter out(path, WriteMode::Truncate);
  for (const auto& c : result.candidates) {
    out.write({{"major_type", std::string(to_string(major_type))},
               {"model", c.model},
               {"task_name", c.task_name},
               {"task_instruction", c.task_instruction},
               {"duplicate", c.duplicate},
               {"status", c.duplicate ? "duplicate" : "pending_review"}});
  }
  for (const auto& [model, error] : result.failures) {
    out.write({{"major_type", std::string(to_string(major_type))}, {"model", model}, {"error", error}});
  }
}

}  // namespace coder_forge
