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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "coder_forge/common.hpp"
#include "coder_forge/corpus_store.hpp"
#include "coder_forge/embedder.hpp"
#include "coder_forge/eval_harness.hpp"
#include "coder_forge/hardneg_miner.hpp"

namespace coder_forge::testing {

#ifndef CODER_FORGE_TEST_SOURCE_DIR
#define CODER_FORGE_TEST_SOURCE_DIR "."
#endif

inline std::filesystem::path source_dir() { return CODER_FORGE_TEST_SOURCE_DIR; }
inline std::filesystem::path golden_dir() { return source_dir() / "golden"; }
inline std::filesystem::path fixture_dir() { return source_dir() / "fixtures"; }

/// Fresh directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("coder-forge-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

inline void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  for (const auto& r : records) out << r.dump() << '\n';
}

inline std::vector<double> random_gaussian(std::mt19937_64& rng, std::size_t dim, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(dim);
  for (auto& x : v) x = n(rng);
  return v;
}

inline EmbeddingVector random_vector(std::mt19937_64& rng, std::size_t dim) {
  return EmbeddingVector(random_gaussian(rng, dim));
}

/// Plain cosine, computed without normalizing first.
inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

struct OracleDoc {
  std::string id;
  std::string text;
  std::vector<double> vec;
};

/// Exhaustive Topk-PercPos: every document scored, the positive and texts
/// equal to the positive or query excluded, keep score < margin * cos(q, pos),
/// then the best k by (score desc, id asc).
inline std::vector<std::string> brute_force_mine(const std::vector<double>& q,
                                                 const std::vector<double>& pos,
                                                 const std::string& query_text,
                                                 const std::string& positive_text,
                                                 const std::string& positive_id,
                                                 const std::vector<OracleDoc>& corpus, std::size_t k,
                                                 double margin) {
  const double ceiling = margin * cosine(q, pos);
  std::vector<std::pair<double, std::string>> kept;
  for (const auto& d : corpus) {
    if (d.id == positive_id || d.text == positive_text || d.text == query_text) continue;
    const double s = cosine(q, d.vec);
    if (s < ceiling) kept.emplace_back(s, d.id);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < kept.size() && i < k; ++i) out.push_back(kept[i].second);
  return out;
}

/// Textbook NDCG@k written independently of the library.
inline double oracle_ndcg_query(const std::vector<std::string>& ranked,
                                const std::map<std::string, int>& judged, std::size_t k) {
  double dcg = 0.0;
  for (std::size_t r = 1; r <= std::min(k, ranked.size()); ++r) {
    auto it = judged.find(ranked[r - 1]);
    const int rel = it == judged.end() ? 0 : it->second;
    dcg += rel / (std::log(static_cast<double>(r) + 1.0) / std::log(2.0));
  }
  std::vector<int> rels;
  for (const auto& [_, r] : judged) rels.push_back(r);
  std::sort(rels.rbegin(), rels.rend());
  double idcg = 0.0;
  for (std::size_t r = 1; r <= std::min(k, rels.size()); ++r) {
    idcg += rels[r - 1] / (std::log(static_cast<double>(r) + 1.0) / std::log(2.0));
  }
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

inline double oracle_ndcg_mean(const RetrievalRun& run, const Qrels& qrels, std::size_t k) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [qid, judged] : qrels) {
    const bool any_positive =
        std::any_of(judged.begin(), judged.end(), [](const auto& kv) { return kv.second > 0; });
    if (!any_positive) continue;
    std::vector<std::string> ranked;
    if (auto it = run.results.find(qid); it != run.results.end()) {
      for (const auto& d : it->second) ranked.push_back(d.id);
    }
    sum += oracle_ndcg_query(ranked, judged, k);
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

/// Valid accepted sample with `negatives` distinct negatives.
inline TrainingSample make_sample(std::size_t i, std::size_t negatives = kDefaultNegatives) {
  TrainingSample s;
  auto& p = s.pair;
  p.task_name = "Code Summary Retrieval";
  p.instruction = "Given a piece of code, retrieve the document string that summarizes the code.";
  p.natural_language = "English";
  p.programming_languages = {"Python"};
  p.bindings = {{"code_language", "Python"}, {"language", "English"}};
  p.query = "def f" + std::to_string(i) + "(): return " + std::to_string(i);
  p.positive = "Returns the constant " + std::to_string(i) + ".";
  p.positive_id = text_id(p.positive);
  p.source_doc_id = stable_id(p.query, "Python");
  p.label = AnnotationLabel::Accept;
  p.trace = {{"generation:1", sha256_hex("g" + std::to_string(i)), p.positive},
             {"annotation", sha256_hex("a" + std::to_string(i)), "1"}};
  for (std::size_t n = 0; n < negatives; ++n) {
    const std::string text = "negative " + std::to_string(i) + "/" + std::to_string(n);
    s.negatives.push_back({text_id(text), text});
  }
  s.mining = {0.95, 0.5, 100, 0.5263157894736842, 0, 0};
  return s;
}

/// Random benchmark with duplicated queries and documents injected.
inline EvalBenchmark random_benchmark(std::mt19937_64& rng, std::size_t queries, std::size_t docs,
                                      double dup_rate) {
  EvalBenchmark b;
  b.name = "random";
  b.task_instruction = "Given a question, retrieve code.";
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> rel(0, 3);
  for (std::size_t i = 0; i < docs; ++i) {
    std::string text = "doc body " + std::to_string(i);
    if (i > 0 && u(rng) < dup_rate) {
      const auto src = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
      text = "  " + b.corpus[src].second + (u(rng) < 0.5 ? "\n" : "");
    }
    b.corpus.emplace_back("d" + std::to_string(i), text);
  }
  for (std::size_t i = 0; i < queries; ++i) {
    std::string text = "query text " + std::to_string(i);
    if (i > 0 && u(rng) < dup_rate) {
      const auto src = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
      text = b.queries[src].second + " ";
    }
    const std::string qid = "q" + std::to_string(i);
    b.queries.emplace_back(qid, text);
    std::uniform_int_distribution<std::size_t> pick(0, docs - 1);
    const std::size_t judged = 1 + rng() % 4;
    for (std::size_t j = 0; j < judged; ++j) b.qrels[qid][b.corpus[pick(rng)].first] = rel(rng);
  }
  return b;
}

}  // namespace coder_forge::testing
