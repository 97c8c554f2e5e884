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
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "coder_forge/common.hpp"

namespace coder_forge {

/// Fixed-length vector of finite reals.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  /// Throws EmbedderError on empty input or non-finite values.
  explicit EmbeddingVector(std::vector<double> values);

  std::size_t dim() const noexcept { return values_.size(); }
  const std::vector<double>& values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  double norm() const;
  /// Unit-length copy. Throws EmbedderError for the zero vector.
  EmbeddingVector normalized() const;

  bool operator==(const EmbeddingVector&) const = default;

 private:
  std::vector<double> values_;
};

double dot(const EmbeddingVector& a, const EmbeddingVector& b);

/// Batch of texts in, batch of equal-dimension vectors out. Implementations
/// must tolerate concurrent calls.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) = 0;
  virtual std::size_t dim() const = 0;

  EmbeddingVector embed_one(const std::string& text);
};

/// Seeded feature hashing over lowercased word tokens. Texts sharing tokens
/// get correlated vectors, which is enough structure for mining tests.
class HashEmbedder final : public Embedder {
 public:
  explicit HashEmbedder(std::uint64_t seed, std::size_t dim = 64);

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;
  std::size_t dim() const override { return dim_; }

  EmbeddingVector embed_text(std::string_view text) const;

 private:
  std::uint64_t seed_;
  std::size_t dim_;
};

/// Vectors looked up from a JSON-lines file of {text | text_hash, vector}.
/// `text_hash` is sha256_hex of the text. Unknown texts throw EmbedderError.
class FixtureEmbedder final : public Embedder {
 public:
  static FixtureEmbedder from_file(const std::filesystem::path& path);

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;
  std::size_t dim() const override { return dim_; }

  void add(std::string_view text, EmbeddingVector vector);

 private:
  std::unordered_map<std::string, EmbeddingVector> by_hash_;
  std::size_t dim_ = 0;
};

/// OpenAI-compatible POST {base}/embeddings.
class HttpEmbedder final : public Embedder {
 public:
  HttpEmbedder(std::string base_url, std::string api_key, std::string model,
               std::size_t batch_size = 64);

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;
  std::size_t dim() const override;

 private:
  std::string base_url_;
  std::string api_key_;
  std::string model_;
  std::size_t batch_size_;
  mutable std::size_t dim_ = 0;
};

/// "seed:N[,dim:D]" builds a HashEmbedder; "fixture:PATH" a FixtureEmbedder.
/// Throws ConfigError for anything else.
std::unique_ptr<Embedder> make_mock_embedder(std::string_view spec);

}  // namespace coder_forge
