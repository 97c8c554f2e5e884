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

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coder_forge/common.hpp"
#include "coder_forge/embedder.hpp"
#include "coder_forge/hardneg_miner.hpp"

namespace coder_forge {

/// qid -> docid -> graded relevance.
using Qrels = std::map<std::string, std::map<std::string, int>>;

struct EvalBenchmark {
  std::string name;
  std::vector<std::pair<std::string, std::string>> queries;  // (qid, text)
  std::vector<std::pair<std::string, std::string>> corpus;   // (docid, text)
  Qrels qrels;
  std::string task_instruction;

  /// Throws ConfigError for duplicate ids, negative relevance, or qrels
  /// referencing unknown qids/docids.
  void validate() const;

  bool operator==(const EvalBenchmark&) const = default;
};

struct RetrievalRun {
  /// qid -> ranked docs, descending score.
  std::map<std::string, std::vector<ScoredDoc>> results;

  bool operator==(const RetrievalRun&) const = default;
};

struct DedupDelta {
  std::size_t queries_removed = 0;
  std::size_t docs_removed = 0;
};

/// Exact-text dedup after trimming. Corpus duplicates collapse onto the
/// first docid with qrels remapped (relevance merged by max); duplicate
/// queries keep the first qid and drop later ones with their qrels.
EvalBenchmark dedup_benchmark(const EvalBenchmark& benchmark, DedupDelta* delta = nullptr);

/// Queries are embedded as instructed queries, documents raw.
RetrievalRun run_retrieval(const EvalBenchmark& benchmark, Embedder& embedder, std::size_t k,
                           std::size_t jobs = 1);

struct NdcgResult {
  /// Only queries with at least one positive judgment.
  std::map<std::string, double> per_query;
  double mean = 0.0;
};

/// Linear gain rel / log2(rank + 1); IDCG from the judgments sorted
/// descending; 0 when IDCG is 0. Throws ConfigError for k == 0.
NdcgResult ndcg_at_k(const RetrievalRun& run, const Qrels& qrels, std::size_t k = 10);

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

/// Reads "qid 0 docid rel" lines (whitespace separated).
Qrels read_qrels(const std::filesystem::path& path);
void write_qrels(const Qrels& qrels, const std::filesystem::path& path);

/// "qid Q0 docid rank score tag" lines, qids in sorted order.
void write_trec_run(const RetrievalRun& run, const std::filesystem::path& path,
                    std::string_view tag);
RetrievalRun read_trec_run(const std::filesystem::path& path);

/// Bundled per-benchmark evaluation instruction, matched case-insensitively.
std::optional<std::string> lookup_eval_instruction(std::string_view benchmark_name);

/// Loads queries.jsonl, corpus.jsonl ({"id"|"_id", "text"}) and qrels.tsv
/// (or qrels.txt) from `dir`. The instruction comes from `instruction`,
/// else instruction.txt, else the bundled table keyed by the directory name.
EvalBenchmark load_benchmark(const std::filesystem::path& dir,
                             std::optional<std::string> instruction = std::nullopt);
void save_benchmark(const EvalBenchmark& benchmark, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct BenchmarkScore {
  std::string name;
  std::optional<double> ndcg;
  std::size_t queries = 0;
  std::size_t corpus_size = 0;
  DedupDelta dedup;
  std::string error;
};

struct EvalReport {
  std::size_t k = 10;
  std::vector<BenchmarkScore> rows;
  /// Mean over benchmarks that scored; nullopt when none did.
  std::optional<double> macro_average;

  std::vector<Json> to_json_lines() const;
  std::string to_table() const;
};

struct EvalOptions {
  bool dedup = false;
  std::size_t k = 10;
  std::size_t jobs = 1;
  /// When set, each benchmark's run is written here as <name>.trec.
  std::optional<std::filesystem::path> run_dir;
};

/// Failures are isolated per benchmark and recorded in the row's error.
EvalReport evaluate(const std::vector<EvalBenchmark>& benchmarks, Embedder& embedder,
                    const EvalOptions& options);

}  // namespace coder_forge
