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
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coder_forge/corpus_store.hpp"
#include "coder_forge/embedder.hpp"
#include "coder_forge/hardneg_miner.hpp"
#include "coder_forge/llm_gateway.hpp"
#include "coder_forge/task_registry.hpp"

namespace coder_forge {

enum class SourceKind { TextRetrieval, TextSts, CodeExisting, CodeSynthetic };

std::string_view to_string(SourceKind kind);
SourceKind parse_source_kind(std::string_view name);
inline bool is_text_kind(SourceKind k) { return k == SourceKind::TextRetrieval || k == SourceKind::TextSts; }
inline bool is_code_kind(SourceKind k) { return !is_text_kind(k); }

struct DataSourceEntry {
  std::string path;
  SourceKind kind = SourceKind::TextRetrieval;
  std::size_t sample_count = 0;
  double weight = 1.0;

  /// Throws ConfigError unless weight > 0 and path is non-empty.
  void validate() const;

  bool operator==(const DataSourceEntry&) const = default;
};

inline constexpr double kDefaultLr1 = 1e-4;
inline constexpr double kDefaultLr3 = 1e-5;
inline constexpr std::size_t kDefaultMaxLen = 512;

struct StageManifest {
  int stage = 1;
  std::vector<DataSourceEntry> entries;
  double learning_rate_hint = kDefaultLr1;
  std::vector<Json> filters_applied;
  std::size_t max_len = kDefaultMaxLen;

  /// Stage 1 text only; stage 2 at least one text and one code entry;
  /// stage 3 code only. Throws ConfigError on violation.
  void validate() const;

  bool operator==(const StageManifest&) const = default;
};

/// Stage 1 gets the text sources, stage 2 everything, stage 3 the code
/// sources; learning-rate hints are (lr1, lr1, lr3).
std::array<StageManifest, 3> plan_stages(std::span<const DataSourceEntry> sources,
                                         double lr1 = kDefaultLr1, double lr3 = kDefaultLr3,
                                         std::size_t top_n = 3);

/// Header record {record: "header", stage, lr_hint, filters, max_len}
/// followed by one {record: "entry", ...} per source.
void write_manifest(const StageManifest& manifest, const std::filesystem::path& path);
StageManifest read_manifest(const std::filesystem::path& path);

std::vector<DataSourceEntry> read_sources(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Stage-3 filters
// ---------------------------------------------------------------------------

struct E5FilterOptions {
  std::size_t top_n = 3;
  std::size_t jobs = 1;
  /// Retrieval corpus; defaults to the union of positives and negatives.
  std::optional<std::vector<CorpusText>> corpus;
};

struct E5FilterResult {
  std::vector<TrainingSample> retained;
  /// Input indices dropped as too easy.
  std::vector<std::size_t> dropped;
  /// Input indices whose positive was absent from the corpus (retained).
  std::vector<std::size_t> missing_positive;
};

/// Drops samples whose positive is retrieved within the top `top_n` for the
/// raw query. Order is preserved.
E5FilterResult e5_simple_filter(std::span<const TrainingSample> samples, Embedder& embedder,
                                const E5FilterOptions& options = {});

struct DifficultyFilterOptions {
  std::string model = std::string(kDefaultModel);
  double temperature = kDefaultJudgeTemperature;
  std::size_t jobs = 1;
};

struct DifficultyFilterResult {
  std::vector<TrainingSample> retained;
  /// Judgment per input sample.
  std::vector<Difficulty> judgments;
  std::map<Difficulty, std::size_t> counts;
};

/// Keeps only samples judged Medium or Hard and records the judgment in
/// their difficulty field. Gateway failures count as Malformed.
DifficultyFilterResult difficulty_filter(std::span<const TrainingSample> samples,
                                         const Registry& registry, Gateway& gateway,
                                         const DifficultyFilterOptions& options = {});

}  // namespace coder_forge
