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

#include "coder_forge/embedder.hpp"

#include <cctype>
#include <cmath>
#include <numeric>
#include <optional>

namespace coder_forge {

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw EmbedderError("embedding vector is empty");
  for (double v : values_) {
    if (!std::isfinite(v)) throw EmbedderError("embedding vector has a non-finite value");
  }
}

double EmbeddingVector::norm() const { return std::sqrt(dot(*this, *this)); }

EmbeddingVector EmbeddingVector::normalized() const {
  const double n = norm();
  if (n == 0.0) throw EmbedderError("cannot normalize a zero vector");
  std::vector<double> out(values_);
  for (double& v : out) v /= n;
  return EmbeddingVector(std::move(out));
}

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw EmbedderError("dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                        std::to_string(b.dim()));
  }
  return std::inner_product(a.values().begin(), a.values().end(), b.values().begin(), 0.0);
}

EmbeddingVector Embedder::embed_one(const std::string& text) {
  auto out = embed(std::span<const std::string>(&text, 1));
  if (out.size() != 1) throw EmbedderError("embedder returned wrong batch size");
  return std::move(out.front());
}

// ---------------------------------------------------------------------------
// HashEmbedder
// ---------------------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(seed);
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h);
}

// Non-ASCII bytes are token characters so CJK text still yields features.
bool is_token_byte(unsigned char c) { return c >= 0x80 || std::isalnum(c) != 0 || c == '_'; }

}  // namespace

HashEmbedder::HashEmbedder(std::uint64_t seed, std::size_t dim) : seed_(seed), dim_(dim) {
  if (dim_ == 0) throw ConfigError("embedding dimension must be positive");
}

EmbeddingVector HashEmbedder::embed_text(std::string_view text) const {
  std::vector<double> v(dim_, 0.0);
  std::size_t i = 0;
  bool any = false;
  while (i < text.size()) {
    while (i < text.size() && !is_token_byte(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && is_token_byte(static_cast<unsigned char>(text[i]))) ++i;
    if (i == start) break;
    const std::uint64_t h = fnv1a(to_lower(text.substr(start, i - start)), seed_);
    v[h % dim_] += (h >> 63) ? -1.0 : 1.0;
    any = true;
  }
  bool zero = true;
  for (double x : v) zero = zero && x == 0.0;
  if (!any || zero) {
    // Dense pseudo-random fallback keeps every text embeddable.
    std::uint64_t state = fnv1a(text, seed_ ^ 0x5bd1e995ULL);
    for (auto& x : v) {
      state = splitmix64(state);
      x = static_cast<double>(state >> 11) * 0x1.0p-53 * 2.0 - 1.0;
    }
  }
  return EmbeddingVector(std::move(v));
}

std::vector<EmbeddingVector> HashEmbedder::embed(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_text(t));
  return out;
}

// ---------------------------------------------------------------------------
// FixtureEmbedder
// ---------------------------------------------------------------------------

void FixtureEmbedder::add(std::string_view text, EmbeddingVector vector) {
  if (dim_ == 0) dim_ = vector.dim();
  if (vector.dim() != dim_) throw EmbedderError("fixture vectors have mixed dimensions");
  by_hash_.insert_or_assign(sha256_hex(text), std::move(vector));
}

FixtureEmbedder FixtureEmbedder::from_file(const std::filesystem::path& path) {
  FixtureEmbedder e;
  for_each_jsonl(path, [&](const Json& record, std::size_t line) {
    std::string hash;
    if (record.contains("text_hash")) {
      hash = record.at("text_hash").get<std::string>();
    } else if (record.contains("text")) {
      hash = sha256_hex(record.at("text").get<std::string>());
    } else {
      throw ParseError("embedding fixture record needs text or text_hash", line);
    }
    EmbeddingVector v;
    try {
      v = EmbeddingVector(record.at("vector").get<std::vector<double>>());
    } catch (const EmbedderError& err) {
      throw ParseError(err.what(), line);
    }
    if (e.dim_ == 0) e.dim_ = v.dim();
    if (v.dim() != e.dim_) throw ParseError("embedding fixture has mixed dimensions", line);
    e.by_hash_.insert_or_assign(std::move(hash), std::move(v));
  });
  if (e.by_hash_.empty()) throw ConfigError("embedding fixture " + path.string() + " is empty");
  return e;
}

std::vector<EmbeddingVector> FixtureEmbedder::embed(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    const std::string h = sha256_hex(t);
    auto it = by_hash_.find(h);
    if (it == by_hash_.end()) throw EmbedderError("no fixture vector for text " + h);
    out.push_back(it->second);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::unique_ptr<Embedder> make_mock_embedder(std::string_view spec) {
  if (spec.starts_with("fixture:")) {
    return std::make_unique<FixtureEmbedder>(FixtureEmbedder::from_file(std::string(spec.substr(8))));
  }
  std::optional<std::uint64_t> seed;
  std::size_t dim = 64;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    const auto comma = spec.find(',', pos);
    const auto part = trim(spec.substr(pos, comma == std::string_view::npos ? std::string_view::npos
                                                                            : comma - pos));
    const auto colon = part.find(':');
    if (colon == std::string_view::npos) throw ConfigError("bad mock embedder spec: " + std::string(spec));
    const std::string key(part.substr(0, colon));
    const std::string value(part.substr(colon + 1));
    try {
      std::size_t used = 0;
      const auto n = std::stoull(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      if (key == "seed") {
        seed = n;
      } else if (key == "dim") {
        dim = n;
      } else {
        throw ConfigError("unknown mock embedder key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw ConfigError("bad mock embedder value '" + value + "'");
    }
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  if (!seed) throw ConfigError("mock embedder spec needs seed:N or fixture:PATH");
  return std::make_unique<HashEmbedder>(*seed, dim);
}

}  // namespace coder_forge
