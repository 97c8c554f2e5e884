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
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coder_forge/common.hpp"
#include "coder_forge/llm_gateway.hpp"

namespace coder_forge {

struct CodeDocument {
  std::string id;
  std::string content;
  std::string programming_language;
  std::string source_ref;
  std::size_t char_length = 0;

  /// Assigns id = stable_id(content, language) and the code-point length.
  static CodeDocument make(std::string content, std::string language, std::string source_ref = {});

  bool operator==(const CodeDocument&) const = default;
};

struct IngestOptions {
  std::optional<std::string> language_filter;
  std::size_t min_chars = 50;
  std::size_t max_chars = 100000;
  /// Accepted language names, matched case-insensitively and rewritten to
  /// their listed spelling. Empty accepts any language verbatim.
  std::vector<std::string> known_languages;
};

struct IngestStats {
  std::size_t records = 0;
  std::size_t accepted = 0;
  std::size_t skipped_length = 0;
  std::size_t skipped_unknown_language = 0;
  std::size_t skipped_filter = 0;

  Json to_json() const;
};

/// Canonical spelling of `name` in `known`, or nullopt.
std::optional<std::string> canonical_language(std::string_view name,
                                              std::span<const std::string> known);

/// Streams {id?, language, content, source} records. Records without
/// content or language throw ParseError naming the line.
class CorpusReader {
 public:
  CorpusReader(const std::filesystem::path& path, IngestOptions options);

  /// Next accepted document, or nullopt at end of input.
  std::optional<CodeDocument> next();
  const IngestStats& stats() const noexcept { return stats_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  IngestOptions options_;
  std::optional<std::string> filter_;
  IngestStats stats_;
  std::size_t line_ = 0;
};

std::vector<CodeDocument> ingest_corpus(const std::filesystem::path& path, IngestOptions options,
                                        IngestStats* stats = nullptr);

struct SampleResult {
  std::vector<CodeDocument> documents;
  bool shortage = false;
};

/// Uniform sample without replacement among documents of `language`,
/// deterministic in (corpus contents, n, language, seed) and independent of
/// corpus order. Throws NotFoundError when nothing matches.
SampleResult sample_documents(std::span<const CodeDocument> corpus, std::size_t n,
                              std::string_view language, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Pairs and samples
// ---------------------------------------------------------------------------

struct TraceEntry {
  std::string stage;  // "generation:1", "generation:2", "annotation", ...
  std::string prompt_hash;
  std::string response;

  bool operator==(const TraceEntry&) const = default;
};

struct QueryPositivePair {
  std::string task_name;
  /// Task instruction rendered with the pair's bindings; the trainer prefixes
  /// queries with it.
  std::string instruction;
  std::string natural_language;
  std::vector<std::string> programming_languages;
  Bindings bindings;
  std::string query;
  std::string positive;
  std::string positive_id;
  std::string source_doc_id;
  std::optional<std::string> companion_doc_id;
  std::optional<AnnotationLabel> label;
  std::vector<TraceEntry> trace;

  bool operator==(const QueryPositivePair&) const = default;
};

struct Negative {
  std::string id;
  std::string text;

  bool operator==(const Negative&) const = default;
};

struct MiningMetadata {
  double margin = 0.0;
  double ceiling = 0.0;
  std::size_t pool_size = 0;
  double positive_similarity = 0.0;
  /// Negatives contributed by the fill rule rather than the ranked pool.
  std::size_t filled = 0;
  /// Subset of `filled` scoring at or above the ceiling.
  std::size_t filled_above_ceiling = 0;

  bool operator==(const MiningMetadata&) const = default;
};

inline constexpr std::size_t kDefaultNegatives = 15;

struct TrainingSample {
  QueryPositivePair pair;
  std::vector<Negative> negatives;
  std::optional<Difficulty> difficulty;
  MiningMetadata mining;

  bool operator==(const TrainingSample&) const = default;
};

Json pair_to_json(const QueryPositivePair& pair);
QueryPositivePair pair_from_json(const Json& record);

Json sample_to_json(const TrainingSample& sample);
TrainingSample sample_from_json(const Json& record);

/// Throws Error describing the first violated invariant: label Accept,
/// exactly `expected_negatives` negatives, distinct ids, positive excluded.
void check_pair(const QueryPositivePair& pair);
void check_sample(const TrainingSample& sample, std::size_t expected_negatives = kDefaultNegatives);

void write_samples(std::span<const TrainingSample> samples, const std::filesystem::path& path,
                   WriteMode mode = WriteMode::Truncate,
                   std::size_t expected_negatives = kDefaultNegatives);
std::vector<TrainingSample> read_samples(const std::filesystem::path& path,
                                         std::size_t expected_negatives = kDefaultNegatives);

void write_pairs(std::span<const QueryPositivePair> pairs, const std::filesystem::path& path,
                 WriteMode mode = WriteMode::Truncate);
std::vector<QueryPositivePair> read_pairs(const std::filesystem::path& path);

}  // namespace coder_forge
