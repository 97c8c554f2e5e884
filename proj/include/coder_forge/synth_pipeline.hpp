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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coder_forge/corpus_store.hpp"
#include "coder_forge/hardneg_miner.hpp"
#include "coder_forge/llm_gateway.hpp"
#include "coder_forge/task_registry.hpp"

namespace coder_forge {

struct LanguagePair {
  std::string source;
  std::string target;

  bool operator==(const LanguagePair&) const = default;
};

/// Parses "src:tgt".
LanguagePair parse_language_pair(std::string_view text);

struct SynthesisConfig {
  std::vector<std::string> task_names;
  std::vector<std::string> natural_languages = {"English"};
  std::vector<std::string> programming_languages;
  /// Source/target pairs for translation tasks.
  std::vector<LanguagePair> translation_pairs;
  /// Accepted samples wanted per (task, natural language, language) cell.
  std::size_t samples_per_cell = 1;
  /// At most attempt_cap_factor * samples_per_cell documents per cell.
  std::size_t attempt_cap_factor = 3;
  std::uint64_t seed = 0;
  std::string model = std::string(kDefaultModel);
  double generation_temperature = kDefaultGenerationTemperature;
  double judge_temperature = kDefaultJudgeTemperature;
  int max_output_tokens = 2048;
  bool retry_malformed = false;
  std::size_t jobs = 1;
  std::filesystem::path output;
  /// Defaults to <output>.ckpt.
  std::optional<std::filesystem::path> checkpoint;
  /// Keep existing output and skip checkpointed work instead of truncating.
  bool resume = false;

  /// Throws ConfigError for unknown tasks or languages, samples_per_cell 0,
  /// translation pairs with src == tgt, or translation tasks without pairs.
  void validate(const Registry& registry) const;
};

struct TaskStats {
  std::size_t generated = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t malformed = 0;
  /// Items that failed before labeling (gateway or mining errors).
  std::size_t failed = 0;

  TaskStats& operator+=(const TaskStats& o);
  bool operator==(const TaskStats&) const = default;
};

struct SynthesisStats {
  TaskStats totals;
  std::map<std::string, TaskStats> per_task;
  /// Accepted samples already present in the output when resuming.
  std::size_t resumed_accepted = 0;
  /// Cells whose quota was not met.
  std::size_t short_cells = 0;

  Json to_json() const;
};

/// Unlabeled pair plus the companion document id it consumed.
struct GenerationRequest {
  const TaskSpec* task = nullptr;
  const CodeDocument* doc = nullptr;
  const CodeDocument* companion = nullptr;
  std::string natural_language;
  std::vector<std::string> programming_languages;
  Bindings bindings;
};

class SynthesisPipeline {
 public:
  /// `miner` may be null, in which case run() persists labeled pairs
  /// without negatives (verified-pair stream).
  SynthesisPipeline(const Registry& registry, Gateway& gateway, const NegativeMiner* miner,
                    SynthesisConfig config);

  /// Runs every generation step and orients the result. Throws
  /// GatewayError, or Error on an empty model output.
  QueryPositivePair generate_pair(const GenerationRequest& request) const;

  /// Labels the pair from the annotation response.
  void annotate_pair(QueryPositivePair& pair, const TaskSpec& task) const;

  /// Generates, annotates and, when a miner is set and the pair is accepted,
  /// assembles a sample.
  struct ItemOutcome {
    QueryPositivePair pair;
    std::optional<TrainingSample> sample;
    std::string error;
  };
  ItemOutcome process(const GenerationRequest& request) const;

  SynthesisStats run(std::span<const CodeDocument> corpus);

  const SynthesisConfig& config() const noexcept { return config_; }

 private:
  const Registry& registry_;
  Gateway& gateway_;
  const NegativeMiner* miner_;
  SynthesisConfig config_;
};

/// Deterministic companion for paired-code tasks: another document of the
/// same language chosen by seed. nullptr when none exists.
const CodeDocument* pick_companion(std::span<const CodeDocument> corpus, const CodeDocument& doc,
                                   std::string_view task_name, std::uint64_t seed);

/// Checkpoint key of one work item.
std::string checkpoint_key(std::string_view task_name, std::string_view target_language,
                           std::string_view doc_id, std::string_view natural_language);

// ---------------------------------------------------------------------------
// Brainstorming
// ---------------------------------------------------------------------------

struct BrainstormCandidate {
  std::string model;
  std::string task_name;
  std::string task_instruction;
  bool duplicate = false;
};

struct BrainstormResult {
  std::vector<BrainstormCandidate> candidates;
  /// model -> error message for models whose output did not parse.
  std::map<std::string, std::string> failures;
};

/// Renders the brainstorm prompt once per model and collects candidates for
/// manual review. Names matching the registry or an earlier candidate
/// (case-insensitive) are flagged duplicate. Nothing is added to the registry.
BrainstormResult brainstorm_tasks(MajorTaskType major_type, std::span<const SeedTask> seeds,
                                  const Registry& registry, Gateway& gateway,
                                  std::span<const std::string> models, double temperature = 1.0);

void write_brainstorm_review(const BrainstormResult& result, MajorTaskType major_type,
                             const std::filesystem::path& path);

}  // namespace coder_forge
