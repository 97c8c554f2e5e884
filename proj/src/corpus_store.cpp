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

#include "coder_forge/corpus_store.hpp"

#include <algorithm>
#include <iterator>
#include <random>
#include <set>

namespace coder_forge {

CodeDocument CodeDocument::make(std::string content, std::string language, std::string source_ref) {
  CodeDocument doc;
  doc.id = stable_id(content, language);
  doc.char_length = utf8_length(content);
  doc.content = std::move(content);
  doc.programming_language = std::move(language);
  doc.source_ref = std::move(source_ref);
  return doc;
}

Json IngestStats::to_json() const {
  return {{"records", records},
          {"accepted", accepted},
          {"skipped_length", skipped_length},
          {"skipped_unknown_language", skipped_unknown_language},
          {"skipped_filter", skipped_filter}};
}

std::optional<std::string> canonical_language(std::string_view name,
                                              std::span<const std::string> known) {
  const std::string lower = to_lower(trim(name));
  for (const auto& k : known) {
    if (to_lower(k) == lower) return k;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// CorpusReader
// ---------------------------------------------------------------------------

CorpusReader::CorpusReader(const std::filesystem::path& path, IngestOptions options)
    : path_(path), in_(path), options_(std::move(options)) {
  if (!in_) throw NotFoundError("cannot open corpus " + path.string());
  if (options_.min_chars > options_.max_chars) {
    throw ConfigError("min_chars exceeds max_chars");
  }
  if (options_.language_filter) {
    if (options_.known_languages.empty()) {
      filter_ = options_.language_filter;
    } else {
      filter_ = canonical_language(*options_.language_filter, options_.known_languages);
      if (!filter_) {
        throw ConfigError("unknown programming language '" + *options_.language_filter + "'");
      }
    }
  }
}

std::optional<CodeDocument> CorpusReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (trim(line).empty()) continue;
    Json record;
    try {
      record = Json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path_.filename().string() + ": malformed corpus record (" + e.what() + ")",
                       line_);
    }
    ++stats_.records;
    if (!record.is_object() || !record.contains("content") || !record["content"].is_string()) {
      throw ParseError(path_.filename().string() + ": corpus record missing content", line_);
    }
    if (!record.contains("language") || !record["language"].is_string()) {
      throw ParseError(path_.filename().string() + ": corpus record missing language", line_);
    }
    std::string language = record["language"].get<std::string>();
    if (!options_.known_languages.empty()) {
      auto canon = canonical_language(language, options_.known_languages);
      if (!canon) {
        ++stats_.skipped_unknown_language;
        continue;
      }
      language = std::move(*canon);
    }
    if (filter_ && language != *filter_) {
      ++stats_.skipped_filter;
      continue;
    }
    std::string content = record["content"].get<std::string>();
    const std::size_t len = utf8_length(content);
    if (len < options_.min_chars || len > options_.max_chars) {
      ++stats_.skipped_length;
      continue;
    }
    std::string source;
    if (record.contains("source") && record["source"].is_string()) {
      source = record["source"].get<std::string>();
    } else if (record.contains("id") && record["id"].is_string()) {
      source = record["id"].get<std::string>();
    }
    ++stats_.accepted;
    return CodeDocument::make(std::move(content), std::move(language), std::move(source));
  }
  return std::nullopt;
}

std::vector<CodeDocument> ingest_corpus(const std::filesystem::path& path, IngestOptions options,
                                        IngestStats* stats) {
  CorpusReader reader(path, std::move(options));
  std::vector<CodeDocument> docs;
  while (auto doc = reader.next()) docs.push_back(std::move(*doc));
  if (stats) *stats = reader.stats();
  return docs;
}

SampleResult sample_documents(std::span<const CodeDocument> corpus, std::size_t n,
                              std::string_view language, std::uint64_t seed) {
  if (n == 0) throw ConfigError("sample size must be at least 1");
  std::vector<const CodeDocument*> matching;
  std::set<std::string_view> seen;
  for (const auto& doc : corpus) {
    if (doc.programming_language == language && seen.insert(doc.id).second) matching.push_back(&doc);
  }
  if (matching.empty()) {
    throw NotFoundError("no documents for language '" + std::string(language) + "'");
  }
  std::sort(matching.begin(), matching.end(),
            [](const CodeDocument* a, const CodeDocument* b) { return a->id < b->id; });
  SampleResult result;
  result.shortage = matching.size() < n;
  std::vector<const CodeDocument*> picked;
  if (result.shortage) {
    picked = matching;
  } else {
    std::mt19937_64 rng(seed);
    std::sample(matching.begin(), matching.end(), std::back_inserter(picked), n, rng);
  }
  // Order is itself a seeded permutation so quotas do not favour low ids.
  std::mt19937_64 order_rng(derive_seed(seed, "order"));
  std::shuffle(picked.begin(), picked.end(), order_rng);
  result.documents.reserve(picked.size());
  for (const auto* d : picked) result.documents.push_back(*d);
  return result;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

Json pair_to_json(const QueryPositivePair& pair) {
  Json j;
  j["task_name"] = pair.task_name;
  j["instruction"] = pair.instruction;
  j["natural_language"] = pair.natural_language;
  j["programming_languages"] = pair.programming_languages;
  j["bindings"] = Json::object();
  for (const auto& [k, v] : pair.bindings) j["bindings"][k] = v;
  j["query"] = pair.query;
  j["positive"] = pair.positive;
  j["positive_id"] = pair.positive_id;
  j["source_doc_id"] = pair.source_doc_id;
  j["companion_doc_id"] = pair.companion_doc_id ? Json(*pair.companion_doc_id) : Json(nullptr);
  j["label"] = pair.label ? Json(std::string(to_string(*pair.label))) : Json(nullptr);
  j["trace"] = Json::array();
  for (const auto& t : pair.trace) {
    j["trace"].push_back({{"stage", t.stage}, {"prompt_hash", t.prompt_hash}, {"response", t.response}});
  }
  return j;
}

QueryPositivePair pair_from_json(const Json& j) {
  QueryPositivePair p;
  p.task_name = j.at("task_name").get<std::string>();
  p.instruction = j.value("instruction", std::string{});
  p.natural_language = j.at("natural_language").get<std::string>();
  p.programming_languages = j.at("programming_languages").get<std::vector<std::string>>();
  if (j.contains("bindings")) {
    for (const auto& [k, v] : j.at("bindings").items()) p.bindings[k] = v.get<std::string>();
  }
  p.query = j.at("query").get<std::string>();
  p.positive = j.at("positive").get<std::string>();
  p.positive_id = j.value("positive_id", std::string{});
  if (p.positive_id.empty()) p.positive_id = text_id(p.positive);
  p.source_doc_id = j.value("source_doc_id", std::string{});
  if (j.contains("companion_doc_id") && !j.at("companion_doc_id").is_null()) {
    p.companion_doc_id = j.at("companion_doc_id").get<std::string>();
  }
  if (j.contains("label") && !j.at("label").is_null()) {
    p.label = parse_annotation_label_name(j.at("label").get<std::string>());
  }
  if (j.contains("trace")) {
    for (const auto& t : j.at("trace")) {
      p.trace.push_back({t.at("stage").get<std::string>(), t.at("prompt_hash").get<std::string>(),
                         t.at("response").get<std::string>()});
    }
  }
  return p;
}

Json sample_to_json(const TrainingSample& sample) {
  Json j = pair_to_json(sample.pair);
  j["negatives"] = Json::array();
  for (const auto& n : sample.negatives) j["negatives"].push_back({{"id", n.id}, {"text", n.text}});
  j["difficulty"] = sample.difficulty ? Json(std::string(to_string(*sample.difficulty))) : Json(nullptr);
  j["mining"] = {{"margin", sample.mining.margin},
                 {"ceiling", sample.mining.ceiling},
                 {"pool_size", sample.mining.pool_size},
                 {"positive_similarity", sample.mining.positive_similarity},
                 {"filled", sample.mining.filled},
                 {"filled_above_ceiling", sample.mining.filled_above_ceiling}};
  return j;
}

TrainingSample sample_from_json(const Json& j) {
  TrainingSample s;
  s.pair = pair_from_json(j);
  for (const auto& n : j.at("negatives")) {
    s.negatives.push_back({n.at("id").get<std::string>(), n.at("text").get<std::string>()});
  }
  if (j.contains("difficulty") && !j.at("difficulty").is_null()) {
    s.difficulty = parse_difficulty_name(j.at("difficulty").get<std::string>());
  }
  if (j.contains("mining")) {
    const auto& m = j.at("mining");
    s.mining.margin = m.value("margin", 0.0);
    s.mining.ceiling = m.value("ceiling", 0.0);
    s.mining.pool_size = m.value("pool_size", std::size_t{0});
    s.mining.positive_similarity = m.value("positive_similarity", 0.0);
    s.mining.filled = m.value("filled", std::size_t{0});
    s.mining.filled_above_ceiling = m.value("filled_above_ceiling", std::size_t{0});
  }
  return s;
}

void check_pair(const QueryPositivePair& pair) {
  if (pair.label != AnnotationLabel::Accept) {
    throw Error("pair for task '" + pair.task_name + "' is not labeled accept");
  }
  if (pair.query.empty() || pair.positive.empty()) throw Error("pair has an empty side");
}

void check_sample(const TrainingSample& sample, std::size_t expected_negatives) {
  check_pair(sample.pair);
  if (sample.negatives.size() != expected_negatives) {
    throw Error("sample has " + std::to_string(sample.negatives.size()) + " negatives, expected " +
                std::to_string(expected_negatives));
  }
  std::set<std::string_view> ids;
  for (const auto& n : sample.negatives) {
    if (!ids.insert(n.id).second) throw Error("duplicate negative id " + n.id);
    if (n.id == sample.pair.positive_id) throw Error("positive id appears among negatives");
    if (n.text == sample.pair.positive) throw Error("positive text appears among negatives");
  }
}

void write_samples(std::span<const TrainingSample> samples, const std::filesystem::path& path,
                   WriteMode mode, std::size_t expected_negatives) {
  for (const auto& s : samples) check_sample(s, expected_negatives);
  JsonlWriter writer(path, mode);
  for (const auto& s : samples) writer.write(sample_to_json(s));
}

std::vector<TrainingSample> read_samples(const std::filesystem::path& path,
                                         std::size_t expected_negatives) {
  std::vector<TrainingSample> out;
  for_each_jsonl(path, [&](const Json& record, std::size_t line) {
    try {
      out.push_back(sample_from_json(record));
      check_sample(out.back(), expected_negatives);
    } catch (const ParseError&) {
      throw;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.filename().string() + ": " + e.what(), line);
    } catch (const Error& e) {
      throw ParseError(path.filename().string() + ": " + e.what(), line);
    }
  });
  return out;
}

void write_pairs(std::span<const QueryPositivePair> pairs, const std::filesystem::path& path,
                 WriteMode mode) {
  for (const auto& p : pairs) check_pair(p);
  JsonlWriter writer(path, mode);
  for (const auto& p : pairs) writer.write(pair_to_json(p));
}

std::vector<QueryPositivePair> read_pairs(const std::filesystem::path& path) {
  std::vector<QueryPositivePair> out;
  for_each_jsonl(path, [&](const Json& record, std::size_t line) {
    try {
      out.push_back(pair_from_json(record));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.filename().string() + ": " + e.what(), line);
    }
  });
  return out;
}

}  // namespace coder_forge
