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

#include "coder_forge/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "coder_forge/prompt_engine.hpp"

namespace coder_forge {

void EvalBenchmark::validate() const {
  std::set<std::string_view> qids;
  std::set<std::string_view> docids;
  for (const auto& [qid, _] : queries) {
    if (!qids.insert(qid).second) throw ConfigError(name + ": duplicate qid " + qid);
  }
  for (const auto& [docid, _] : corpus) {
    if (!docids.insert(docid).second) throw ConfigError(name + ": duplicate docid " + docid);
  }
  for (const auto& [qid, docs] : qrels) {
    if (!qids.count(qid)) throw ConfigError(name + ": qrels reference unknown qid " + qid);
    for (const auto& [docid, rel] : docs) {
      if (!docids.count(docid)) throw ConfigError(name + ": qrels reference unknown docid " + docid);
      if (rel < 0) throw ConfigError(name + ": negative relevance for " + qid + "/" + docid);
    }
  }
}

EvalBenchmark dedup_benchmark(const EvalBenchmark& b, DedupDelta* delta) {
  EvalBenchmark out;
  out.name = b.name;
  out.task_instruction = b.task_instruction;

  std::unordered_map<std::string, std::string> canonical_doc;  // docid -> kept docid
  std::unordered_map<std::string_view, std::string_view> first_doc_by_text;
  for (const auto& [docid, text] : b.corpus) {
    auto [it, inserted] = first_doc_by_text.emplace(trim(text), docid);
    canonical_doc[docid] = std::string(it->second);
    if (inserted) out.corpus.emplace_back(docid, text);
  }

  std::set<std::string_view> kept_qids;
  std::unordered_map<std::string_view, std::string_view> first_query_by_text;
  for (const auto& [qid, text] : b.queries) {
    if (first_query_by_text.emplace(trim(text), qid).second) {
      out.queries.emplace_back(qid, text);
      kept_qids.insert(qid);
    }
  }

  for (const auto& [qid, docs] : b.qrels) {
    if (!kept_qids.count(qid)) continue;
    auto& merged = out.qrels[qid];
    for (const auto& [docid, rel] : docs) {
      auto c = canonical_doc.find(docid);
      const std::string& target = c == canonical_doc.end() ? docid : c->second;
      auto [it, inserted] = merged.emplace(target, rel);
      if (!inserted) it->second = std::max(it->second, rel);
    }
  }

  if (delta) {
    delta->queries_removed = b.queries.size() - out.queries.size();
    delta->docs_removed = b.corpus.size() - out.corpus.size();
  }
  return out;
}

RetrievalRun run_retrieval(const EvalBenchmark& b, Embedder& embedder, std::size_t k,
                           std::size_t jobs) {
  if (k == 0) throw ConfigError("k must be at least 1");
  if (b.corpus.empty()) throw ConfigError(b.name + ": empty corpus");
  std::vector<std::string> doc_texts;
  doc_texts.reserve(b.corpus.size());
  for (const auto& [_, text] : b.corpus) doc_texts.push_back(text);
  const auto doc_vecs = embedder.embed(doc_texts);
  if (doc_vecs.size() != doc_texts.size()) throw EmbedderError("embedder returned wrong batch size");
  FlatIndex index;
  for (std::size_t i = 0; i < b.corpus.size(); ++i) index.add(b.corpus[i].first, doc_vecs[i]);

  std::vector<std::vector<ScoredDoc>> ranked(b.queries.size());
  parallel_for(b.queries.size(), jobs, [&](std::size_t i) {
    const auto text = format_instructed_query(b.task_instruction, b.queries[i].second).rendered;
    ranked[i] = index.search(embedder.embed_one(text), k);
  });
  RetrievalRun run;
  for (std::size_t i = 0; i < b.queries.size(); ++i) {
    run.results[b.queries[i].first] = std::move(ranked[i]);
  }
  return run;
}

NdcgResult ndcg_at_k(const RetrievalRun& run, const Qrels& qrels, std::size_t k) {
  if (k == 0) throw ConfigError("k must be at least 1");
  NdcgResult result;
  double total = 0.0;
  for (const auto& [qid, judged] : qrels) {
    std::vector<int> ideal;
    for (const auto& [_, rel] : judged) {
      if (rel > 0) ideal.push_back(rel);
    }
    if (ideal.empty()) continue;
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) {
      idcg += ideal[i] / std::log2(static_cast<double>(i) + 2.0);
    }
    double dcg = 0.0;
    if (auto it = run.results.find(qid); it != run.results.end()) {
      const auto& docs = it->second;
      for (std::size_t i = 0; i < std::min(k, docs.size()); ++i) {
        auto rel = judged.find(docs[i].id);
        if (rel != judged.end() && rel->second > 0) {
          dcg += rel->second / std::log2(static_cast<double>(i) + 2.0);
        }
      }
    }
    const double v = idcg > 0.0 ? dcg / idcg : 0.0;
    result.per_query[qid] = v;
    total += v;
  }
  if (!result.per_query.empty()) result.mean = total / static_cast<double>(result.per_query.size());
  return result;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

Qrels read_qrels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open qrels " + path.string());
  Qrels qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string qid, iter, docid, rel_text;
    if (!(fields >> qid >> iter >> docid >> rel_text)) {
      throw ParseError(path.filename().string() + ": expected 'qid 0 docid rel'", line_no);
    }
    // Tolerate a BEIR-style header line.
    if (line_no == 1 && (qid == "query-id" || qid == "qid")) continue;
    int rel = 0;
    try {
      std::size_t used = 0;
      rel = std::stoi(rel_text, &used);
      if (used != rel_text.size()) throw std::invalid_argument(rel_text);
    } catch (const std::logic_error&) {
      throw ParseError(path.filename().string() + ": bad relevance '" + rel_text + "'", line_no);
    }
    qrels[qid][docid] = rel;
  }
  return qrels;
}

void write_qrels(const Qrels& qrels, const std::filesystem::path& path) {
  JsonlWriter out(path, WriteMode::Truncate);
  for (const auto& [qid, docs] : qrels) {
    for (const auto& [docid, rel] : docs) out.write_line(fmt::format("{} 0 {} {}", qid, docid, rel));
  }
}

void write_trec_run(const RetrievalRun& run, const std::filesystem::path& path,
                    std::string_view tag) {
  JsonlWriter out(path, WriteMode::Truncate);
  for (const auto& [qid, docs] : run.results) {
    for (std::size_t i = 0; i < docs.size(); ++i) {
      out.write_line(fmt::format("{} Q0 {} {} {:.17g} {}", qid, docs[i].id, i + 1, docs[i].score, tag));
    }
  }
}

RetrievalRun read_trec_run(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open run " + path.string());
  RetrievalRun run;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string qid, q0, docid, tag;
    std::size_t rank = 0;
    double score = 0.0;
    if (!(fields >> qid >> q0 >> docid >> rank >> score >> tag)) {
      throw ParseError(path.filename().string() + ": expected 'qid Q0 docid rank score tag'", line_no);
    }
    run.results[qid].push_back({docid, score});
  }
  for (auto& [_, docs] : run.results) std::stable_sort(docs.begin(), docs.end(), ranks_before);
  return run;
}

std::optional<std::string> lookup_eval_instruction(std::string_view benchmark_name) {
  const auto path = default_data_dir() / "eval_instructions.jsonl";
  if (!std::filesystem::exists(path)) return std::nullopt;
  const std::string wanted = to_lower(benchmark_name);
  std::optional<std::string> found;
  for_each_jsonl(path, [&](const Json& record, std::size_t) {
    if (!found && to_lower(record.at("benchmark").get<std::string>()) == wanted) {
      found = record.at("instruction").get<std::string>();
    }
  });
  return found;
}

namespace {

std::vector<std::pair<std::string, std::string>> read_id_text(const std::filesystem::path& path) {
  std::vector<std::pair<std::string, std::string>> out;
  for_each_jsonl(path, [&](const Json& record, std::size_t line) {
    const Json* id = nullptr;
    if (record.contains("id")) id = &record.at("id");
    else if (record.contains("_id")) id = &record.at("_id");
    if (!id || !record.contains("text")) {
      throw ParseError(path.filename().string() + ": record needs id (or _id) and text", line);
    }
    std::string text = record.at("text").get<std::string>();
    // BEIR corpora may carry a separate title.
    if (record.contains("title") && record.at("title").is_string() &&
        !record.at("title").get<std::string>().empty()) {
      text = record.at("title").get<std::string>() + " " + text;
    }
    out.emplace_back(id->is_string() ? id->get<std::string>() : id->dump(), std::move(text));
  });
  return out;
}

}  // namespace

EvalBenchmark load_benchmark(const std::filesystem::path& dir, std::optional<std::string> instruction) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("benchmark directory not found: " + dir.string());
  EvalBenchmark b;
  b.name = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
  b.queries = read_id_text(dir / "queries.jsonl");
  b.corpus = read_id_text(dir / "corpus.jsonl");
  std::filesystem::path qrels_path = dir / "qrels.tsv";
  if (!std::filesystem::exists(qrels_path)) qrels_path = dir / "qrels.txt";
  b.qrels = read_qrels(qrels_path);
  if (instruction) {
    b.task_instruction = *instruction;
  } else if (std::ifstream in(dir / "instruction.txt"); in) {
    std::stringstream ss;
    ss << in.rdbuf();
    b.task_instruction = std::string(trim(ss.str()));
  } else if (auto bundled = lookup_eval_instruction(b.name)) {
    b.task_instruction = *bundled;
  } else {
    throw ConfigError(b.name + ": no instruction.txt and no bundled instruction for this benchmark");
  }
  b.validate();
  return b;
}

void save_benchmark(const EvalBenchmark& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    JsonlWriter q(dir / "queries.jsonl", WriteMode::Truncate);
    for (const auto& [id, text] : b.queries) q.write({{"id", id}, {"text", text}});
  }
  {
    JsonlWriter c(dir / "corpus.jsonl", WriteMode::Truncate);
    for (const auto& [id, text] : b.corpus) c.write({{"id", id}, {"text", text}});
  }
  write_qrels(b.qrels, dir / "qrels.tsv");
  JsonlWriter(dir / "instruction.txt", WriteMode::Truncate).write_line(b.task_instruction);
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

std::vector<Json> EvalReport::to_json_lines() const {
  std::vector<Json> lines;
  for (const auto& r : rows) {
    Json j = {{"benchmark", r.name},
              {fmt::format("ndcg@{}", k), r.ndcg ? Json(*r.ndcg) : Json(nullptr)},
              {"queries", r.queries},
              {"corpus_size", r.corpus_size},
              {"queries_removed", r.dedup.queries_removed},
              {"docs_removed", r.dedup.docs_removed}};
    if (!r.error.empty()) j["error"] = r.error;
    lines.push_back(std::move(j));
  }
  lines.push_back({{"benchmark", "macro_average"},
                   {fmt::format("ndcg@{}", k), macro_average ? Json(*macro_average) : Json(nullptr)}});
  return lines;
}

std::string EvalReport::to_table() const {
  std::size_t width = 13;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::string out = fmt::format("{:<{}}  {:>9}  {:>8}  {:>8}  {:>9}  {:>9}\n", "benchmark", width,
                                fmt::format("NDCG@{}", k), "queries", "corpus", "q_removed",
                                "d_removed");
  for (const auto& r : rows) {
    const std::string score = r.ndcg ? fmt::format("{:.4f}", *r.ndcg) : std::string("error");
    out += fmt::format("{:<{}}  {:>9}  {:>8}  {:>8}  {:>9}  {:>9}\n", r.name, width, score,
                       r.queries, r.corpus_size, r.dedup.queries_removed, r.dedup.docs_removed);
  }
  out += fmt::format("{:<{}}  {:>9}\n", "macro_average", width,
                     macro_average ? fmt::format("{:.4f}", *macro_average) : std::string("n/a"));
  return out;
}

EvalReport evaluate(const std::vector<EvalBenchmark>& benchmarks, Embedder& embedder,
                    const EvalOptions& options) {
  if (options.k == 0) throw ConfigError("k must be at least 1");
  EvalReport report;
  report.k = options.k;
  double sum = 0.0;
  std::size_t scored = 0;
  for (const auto& input : benchmarks) {
    BenchmarkScore row;
    row.name = input.name;
    try {
      const EvalBenchmark b = options.dedup ? dedup_benchmark(input, &row.dedup) : input;
      b.validate();
      row.queries = b.queries.size();
      row.corpus_size = b.corpus.size();
      const auto run = run_retrieval(b, embedder, options.k, options.jobs);
      if (options.run_dir) write_trec_run(run, *options.run_dir / (b.name + ".trec"), "coder-forge");
      row.ndcg = ndcg_at_k(run, b.qrels, options.k).mean;
      sum += *row.ndcg;
      ++scored;
    } catch (const std::exception& e) {
      row.error = e.what();
      spdlog::error("benchmark {} failed: {}", input.name, e.what());
    }
    report.rows.push_back(std::move(row));
  }
  if (scored > 0) report.macro_average = sum / static_cast<double>(scored);
  return report;
}

}  // namespace coder_forge
