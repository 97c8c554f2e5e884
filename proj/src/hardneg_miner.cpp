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

#include "coder_forge/hardneg_miner.hpp"

#include <algorithm>
#include <random>

namespace coder_forge {

bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

namespace {

std::vector<ScoredDoc> select_top(std::vector<ScoredDoc> scored, std::size_t k) {
  k = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                    ranks_before);
  scored.resize(k);
  return scored;
}

}  // namespace

std::vector<ScoredDoc> top_k(const EmbeddingVector& query,
                             std::span<const std::pair<std::string, EmbeddingVector>> corpus,
                             std::size_t k) {
  if (k == 0) throw ConfigError("k must be at least 1");
  if (corpus.empty()) throw ConfigError("cannot search an empty corpus");
  const EmbeddingVector q = query.normalized();
  std::vector<ScoredDoc> scored;
  scored.reserve(corpus.size());
  for (const auto& [id, vec] : corpus) scored.push_back({id, dot(q, vec.normalized())});
  return select_top(std::move(scored), k);
}

void FlatIndex::add(std::string id, const EmbeddingVector& vector) {
  if (dim_ == 0) dim_ = vector.dim();
  if (vector.dim() != dim_) {
    throw EmbedderError("dimension mismatch: index has " + std::to_string(dim_) + ", got " +
                        std::to_string(vector.dim()));
  }
  const auto unit = vector.normalized();
  ids_.push_back(std::move(id));
  data_.insert(data_.end(), unit.values().begin(), unit.values().end());
}

std::vector<ScoredDoc> FlatIndex::rank_all(const EmbeddingVector& query) const {
  return search(query, ids_.size());
}

std::vector<ScoredDoc> FlatIndex::search(const EmbeddingVector& query, std::size_t k) const {
  if (k == 0) throw ConfigError("k must be at least 1");
  if (ids_.empty()) throw ConfigError("cannot search an empty corpus");
  if (query.dim() != dim_) {
    throw EmbedderError("dimension mismatch: index has " + std::to_string(dim_) + ", query has " +
                        std::to_string(query.dim()));
  }
  const auto q = query.normalized();
  std::vector<ScoredDoc> scored(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    const double* row = data_.data() + i * dim_;
    double s = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) s += row[d] * q[d];
    scored[i] = {ids_[i], s};
  }
  return select_top(std::move(scored), k);
}

std::string_view to_string(FillRule rule) {
  return rule == FillRule::Error ? "error" : "random_below_ceiling";
}

FillRule parse_fill_rule(std::string_view name) {
  if (name == "error") return FillRule::Error;
  if (name == "random_below_ceiling") return FillRule::RandomBelowCeiling;
  throw ConfigError("unknown fill rule '" + std::string(name) + "'");
}

void MiningConfig::validate() const {
  if (k_negatives == 0) throw ConfigError("k_negatives must be at least 1");
  if (!(margin > 0.0 && margin <= 1.0)) throw ConfigError("margin must lie in (0, 1]");
  if (candidate_pool == 0) throw ConfigError("candidate_pool must be at least 1");
}

// ---------------------------------------------------------------------------
// NegativeMiner
// ---------------------------------------------------------------------------

NegativeMiner::NegativeMiner(std::vector<CorpusText> corpus, Embedder& embedder,
                             MiningConfig config, std::size_t batch_size)
    : embedder_(embedder), config_(config) {
  config_.validate();
  for (auto& entry : corpus) {
    if (by_id_.emplace(entry.id, corpus_.size()).second) corpus_.push_back(std::move(entry));
  }
  if (corpus_.empty()) throw ConfigError("negative corpus is empty");
  if (batch_size == 0) batch_size = 1;
  std::vector<std::string> batch;
  for (std::size_t start = 0; start < corpus_.size(); start += batch_size) {
    batch.clear();
    const std::size_t end = std::min(corpus_.size(), start + batch_size);
    for (std::size_t i = start; i < end; ++i) batch.push_back(corpus_[i].text);
    const auto vectors = embedder_.embed(batch);
    if (vectors.size() != batch.size()) throw EmbedderError("embedder returned wrong batch size");
    for (std::size_t i = start; i < end; ++i) index_.add(corpus_[i].id, vectors[i - start]);
  }
}

MiningResult NegativeMiner::mine(std::string_view query, std::string_view positive,
                                 std::string_view positive_id, std::string_view key) const {
  const std::vector<std::string> texts = {std::string(query), std::string(positive)};
  const auto vectors = embedder_.embed(texts);
  if (vectors.size() != 2) throw EmbedderError("embedder returned wrong batch size");
  return mine_vectors(vectors[0], vectors[1], positive, query, positive_id, key);
}

MiningResult NegativeMiner::mine_vectors(const EmbeddingVector& query,
                                         const EmbeddingVector& positive,
                                         std::string_view positive_text,
                                         std::string_view query_text,
                                         std::string_view positive_id,
                                         std::string_view key) const {
  const auto q = query.normalized();
  const double pos_sim = dot(q, positive.normalized());
  const double ceiling = config_.margin * pos_sim;
  const std::size_t k = config_.k_negatives;

  MiningResult result;
  result.metadata.margin = config_.margin;
  result.metadata.ceiling = ceiling;
  result.metadata.positive_similarity = pos_sim;

  const auto ranking = index_.rank_all(q);
  auto eligible = [&](const ScoredDoc& d) {
    if (d.id == positive_id) return false;
    const auto& text = corpus_[by_id_.at(d.id)].text;
    return text != positive_text && text != query_text;
  };

  std::size_t total_eligible = 0;
  std::vector<const ScoredDoc*> pool;
  std::vector<const ScoredDoc*> outside_below;
  std::vector<const ScoredDoc*> outside_above;
  std::vector<const ScoredDoc*> pool_above;
  for (const auto& d : ranking) {
    if (!eligible(d)) continue;
    ++total_eligible;
    if (pool.size() < config_.candidate_pool) {
      pool.push_back(&d);
      if (d.score < ceiling) {
        if (result.negatives.size() < k) result.negatives.push_back({d.id, corpus_[by_id_.at(d.id)].text});
      } else {
        pool_above.push_back(&d);
      }
    } else if (d.score < ceiling) {
      outside_below.push_back(&d);
    } else {
      outside_above.push_back(&d);
    }
  }
  result.metadata.pool_size = pool.size();

  if (result.negatives.size() == k) return result;
  if (total_eligible < k) {
    throw InsufficientPoolError("insufficient negative pool: " + std::to_string(total_eligible) +
                                " eligible documents, need " + std::to_string(k));
  }
  if (config_.fill_rule == FillRule::Error) {
    throw InsufficientPoolError("insufficient negative pool: " +
                                std::to_string(result.negatives.size()) +
                                " candidates below the ceiling, need " + std::to_string(k));
  }

  std::mt19937_64 rng(derive_seed(config_.seed, key));
  auto draw = [&](const std::vector<const ScoredDoc*>& from, bool above) {
    for (const auto* d : from) {
      if (result.negatives.size() == k) return;
      result.negatives.push_back({d->id, corpus_[by_id_.at(d->id)].text});
      ++result.metadata.filled;
      if (above) ++result.metadata.filled_above_ceiling;
    }
  };
  std::shuffle(outside_below.begin(), outside_below.end(), rng);
  draw(outside_below, false);
  // Last resort: anything eligible, flagged as above the ceiling.
  pool_above.insert(pool_above.end(), outside_above.begin(), outside_above.end());
  std::sort(pool_above.begin(), pool_above.end(),
            [](const ScoredDoc* a, const ScoredDoc* b) { return ranks_before(*a, *b); });
  draw(pool_above, true);
  return result;
}

std::vector<CorpusText> corpus_texts(std::span<const CodeDocument> docs) {
  std::vector<CorpusText> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back({d.id, d.content});
  return out;
}

TrainingSample assemble_sample(QueryPositivePair pair, const NegativeMiner& miner) {
  if (pair.label != AnnotationLabel::Accept) {
    throw Error("cannot assemble a sample from a pair that is not labeled accept");
  }
  const std::string key = pair.task_name + "|" + pair.source_doc_id + "|" + pair.natural_language +
                          "|" + pair.positive_id;
  auto mined = miner.mine(pair.query, pair.positive, pair.positive_id, key);
  TrainingSample sample;
  sample.pair = std::move(pair);
  sample.negatives = std::move(mined.negatives);
  sample.mining = mined.metadata;
  return sample;
}

}  // namespace coder_forge
