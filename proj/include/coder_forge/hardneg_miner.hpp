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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coder_forge/corpus_store.hpp"
#include "coder_forge/embedder.hpp"

namespace coder_forge {

struct ScoredDoc {
  std::string id;
  double score = 0.0;

  bool operator==(const ScoredDoc&) const = default;
};

/// Descending score, ties by ascending id.
bool ranks_before(const ScoredDoc& a, const ScoredDoc& b);

/// Exact cosine top-k. Throws EmbedderError on dimension mismatch and
/// ConfigError on an empty corpus or k == 0.
std::vector<ScoredDoc> top_k(const EmbeddingVector& query,
                             std::span<const std::pair<std::string, EmbeddingVector>> corpus,
                             std::size_t k);

/// Boundary for swapping in an approximate index.
class VectorIndex {
 public:
  virtual ~VectorIndex() = default;
  virtual std::vector<ScoredDoc> search(const EmbeddingVector& query, std::size_t k) const = 0;
  virtual std::size_t size() const = 0;
  virtual std::size_t dim() const = 0;
};

/// Brute-force index over L2-normalized vectors. Read-only after build.
class FlatIndex final : public VectorIndex {
 public:
  FlatIndex() = default;
  /// Normalizes on insert.
  void add(std::string id, const EmbeddingVector& vector);

  std::vector<ScoredDoc> search(const EmbeddingVector& query, std::size_t k) const override;
  std::size_t size() const override { return ids_.size(); }
  std::size_t dim() const override { return dim_; }

  /// Every document scored, in rank order.
  std::vector<ScoredDoc> rank_all(const EmbeddingVector& query) const;

 private:
  std::vector<std::string> ids_;
  std::vector<double> data_;  // row-major, size() x dim()
  std::size_t dim_ = 0;
};

enum class FillRule { Error, RandomBelowCeiling };

std::string_view to_string(FillRule rule);
FillRule parse_fill_rule(std::string_view name);

struct MiningConfig {
  std::size_t k_negatives = kDefaultNegatives;
  double margin = 0.95;
  std::size_t candidate_pool = 100;
  FillRule fill_rule = FillRule::RandomBelowCeiling;
  std::uint64_t seed = 0;

  /// Throws ConfigError when k_negatives == 0, margin outside (0, 1] or
  /// candidate_pool == 0.
  void validate() const;
};

struct MiningResult {
  std::vector<Negative> negatives;
  MiningMetadata metadata;
};

struct CorpusText {
  std::string id;
  std::string text;
};

/// Topk-PercPos miner over a fixed corpus. ceiling = margin * cos(q, d+);
/// the first `candidate_pool` eligible documents in rank order are scanned
/// and the top k scoring strictly below the ceiling are kept. Eligible means
/// not the positive id and not textually equal to the positive or query.
/// Safe for concurrent mine() calls.
class NegativeMiner {
 public:
  NegativeMiner(std::vector<CorpusText> corpus, Embedder& embedder, MiningConfig config,
                std::size_t batch_size = 256);

  /// `key` seeds the fill rule so results do not depend on call order.
  MiningResult mine(std::string_view query, std::string_view positive,
                    std::string_view positive_id, std::string_view key) const;

  /// Same rule on precomputed vectors; the query and positive are normalized.
  MiningResult mine_vectors(const EmbeddingVector& query, const EmbeddingVector& positive,
                            std::string_view positive_text, std::string_view query_text,
                            std::string_view positive_id, std::string_view key) const;

  const MiningConfig& config() const noexcept { return config_; }
  std::size_t corpus_size() const noexcept { return corpus_.size(); }

 private:
  std::vector<CorpusText> corpus_;
  std::unordered_map<std::string, std::size_t> by_id_;
  FlatIndex index_;
  Embedder& embedder_;
  MiningConfig config_;
};

std::vector<CorpusText> corpus_texts(std::span<const CodeDocument> docs);

/// Attaches mined negatives to an accepted pair. Throws Error when the pair
/// is not Accept-labeled and InsufficientPoolError when the corpus cannot
/// yield k distinct negatives.
TrainingSample assemble_sample(QueryPositivePair pair, const NegativeMiner& miner);

}  // namespace coder_forge
