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

#include "coder_forge/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include <spdlog/spdlog.h>

namespace coder_forge {

std::string_view to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::TextRetrieval: return "text_retrieval";
    case SourceKind::TextSts: return "text_sts";
    case SourceKind::CodeExisting: return "code_existing";
    case SourceKind::CodeSynthetic: return "code_synthetic";
  }
  return "?";
}

SourceKind parse_source_kind(std::string_view name) {
  for (auto k : {SourceKind::TextRetrieval, SourceKind::TextSts, SourceKind::CodeExisting,
                 SourceKind::CodeSynthetic}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown source kind '" + std::string(name) + "'");
}

void DataSourceEntry::validate() const {
  if (path.empty()) throw ConfigError("data source has an empty path");
  if (!(weight > 0.0) || !std::isfinite(weight)) {
    throw ConfigError("data source " + path + " must have a positive weight");
  }
}

void StageManifest::validate() const {
  if (stage < 1 || stage > 3) throw ConfigError("stage must be 1, 2 or 3");
  if (!(learning_rate_hint > 0.0)) throw ConfigError("learning rate hint must be positive");
  bool text = false;
  bool code = false;
  for (const auto& e : entries) {
    e.validate();
    text = text || is_text_kind(e.kind);
    code = code || is_code_kind(e.kind);
  }
  const std::string label = "stage " + std::to_string(stage) + " manifest";
  switch (stage) {
    case 1:
      if (code) throw ConfigError(label + " must contain text data only");
      if (!text) throw ConfigError(label + " has no text data");
      break;
    case 2:
      if (!text || !code) throw ConfigError(label + " must mix text and code data");
      break;
    case 3:
      if (text) throw ConfigError(label + " must contain code data only");
      if (!code) throw ConfigError(label + " has no code data");
      break;
  }
}

std::array<StageManifest, 3> plan_stages(std::span<const DataSourceEntry> sources, double lr1,
                                         double lr3, std::size_t top_n) {
  if (!(lr1 > 0.0) || !(lr3 > 0.0)) throw ConfigError("learning rates must be positive");
  bool text = false;
  bool code = false;
  for (const auto& s : sources) {
    s.validate();
    text = text || is_text_kind(s.kind);
    code = code || is_code_kind(s.kind);
  }
  if (!code) throw ConfigError("stage 2/3 require code data");
  if (!text) throw ConfigError("stage 1/2 require text data");

  std::array<StageManifest, 3> stages;
  for (int i = 0; i < 3; ++i) stages[i].stage = i + 1;
  stages[0].learning_rate_hint = lr1;
  stages[1].learning_rate_hint = lr1;
  stages[2].learning_rate_hint = lr3;
  for (const auto& s : sources) {
    if (is_text_kind(s.kind)) stages[0].entries.push_back(s);
    stages[1].entries.push_back(s);
    if (is_code_kind(s.kind)) stages[2].entries.push_back(s);
  }
  stages[2].filters_applied = {
      Json{{"name", "e5_simple_filter"}, {"top_n", top_n}},
      Json{{"name", "difficulty_filter"}, {"retain", Json::array({"medium", "hard"})}}};
  for (const auto& m : stages) m.validate();
  return stages;
}

namespace {

DataSourceEntry entry_from_json(const Json& j) {
  DataSourceEntry e;
  e.path = j.at("path").get<std::string>();
  e.kind = parse_source_kind(j.at("kind").get<std::string>());
  const auto count = j.at("sample_count").get<std::int64_t>();
  if (count < 0) throw ConfigError("sample_count must be non-negative");
  e.sample_count = static_cast<std::size_t>(count);
  e.weight = j.value("weight", 1.0);
  e.validate();
  return e;
}

}  // namespace

void write_manifest(const StageManifest& m, const std::filesystem::path& path) {
  m.validate();
  JsonlWriter out(path, WriteMode::Truncate);
  Json filters = Json::array();
  for (const auto& f : m.filters_applied) filters.push_back(f);
  out.write({{"record", "header"},
             {"stage", m.stage},
             {"lr_hint", m.learning_rate_hint},
             {"filters", filters},
             {"max_len", m.max_len}});
  for (const auto& e : m.entries) {
    out.write({{"record", "entry"},
               {"path", e.path},
               {"kind", std::string(to_string(e.kind))},
               {"sample_count", e.sample_count},
               {"weight", e.weight}});
  }
}

StageManifest read_manifest(const std::filesystem::path& path) {
  StageManifest m;
  bool header = false;
  for_each_jsonl(path, [&](const Json& j, std::size_t line) {
    const auto kind = j.value("record", std::string{});
    try {
      if (kind == "header") {
        if (header) throw ParseError("second manifest header", line);
        header = true;
        m.stage = j.at("stage").get<int>();
        m.learning_rate_hint = j.at("lr_hint").get<double>();
        m.filters_applied.clear();
        for (const auto& f : j.value("filters", Json::array())) m.filters_applied.push_back(f);
        m.max_len = j.value("max_len", kDefaultMaxLen);
      } else if (kind == "entry") {
        if (!header) throw ParseError("manifest entry before header", line);
        m.entries.push_back(entry_from_json(j));
      } else {
        throw ParseError("unknown manifest record '" + kind + "'", line);
      }
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), line);
    }
  });
  if (!header) throw ParseError(path.filename().string() + ": manifest has no header");
  m.validate();
  return m;
}

std::vector<DataSourceEntry> read_sources(const std::filesystem::path& path) {
  std::vector<DataSourceEntry> out;
  for_each_jsonl(path, [&](const Json& j, std::size_t line) {
    try {
      out.push_back(entry_from_json(j));
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), line);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Filters
// ---------------------------------------------------------------------------

E5FilterResult e5_simple_filter(std::span<const TrainingSample> samples, Embedder& embedder,
                                const E5FilterOptions& options) {
  if (options.top_n == 0) throw ConfigError("top_n must be at least 1");
  E5FilterResult result;
  if (samples.empty()) return result;

  std::vector<CorpusText> corpus;
  if (options.corpus) {
    corpus = *options.corpus;
  } else {
    std::unordered_set<std::string> seen;
    for (const auto& s : samples) {
      if (seen.insert(s.pair.positive_id).second) corpus.push_back({s.pair.positive_id, s.pair.positive});
      for (const auto& n : s.negatives) {
        if (seen.insert(n.id).second) corpus.push_back({n.id, n.text});
      }
    }
  }
  std::unordered_set<std::string> corpus_ids;
  FlatIndex index;
  {
    std::vector<std::string> texts;
    std::vector<std::string> ids;
    for (auto& c : corpus) {
      if (!corpus_ids.insert(c.id).second) continue;
      ids.push_back(c.id);
      texts.push_back(c.text);
    }
    const auto vecs = embedder.embed(texts);
    if (vecs.size() != texts.size()) throw EmbedderError("embedder returned wrong batch size");
    for (std::size_t i = 0; i < ids.size(); ++i) index.add(ids[i], vecs[i]);
  }

  std::vector<char> drop(samples.size(), 0);
  std::vector<char> missing(samples.size(), 0);
  parallel_for(samples.size(), options.jobs, [&](std::size_t i) {
    const auto& s = samples[i];
    if (!corpus_ids.count(s.pair.positive_id)) {
      missing[i] = 1;
      return;
    }
    const auto hits = index.search(embedder.embed_one(s.pair.query), options.top_n);
    drop[i] = std::any_of(hits.begin(), hits.end(),
                          [&](const ScoredDoc& d) { return d.id == s.pair.positive_id; });
  });
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (missing[i]) {
      spdlog::warn("sample {} positive {} is absent from the filter corpus; retained", i,
                   samples[i].pair.positive_id);
      result.missing_positive.push_back(i);
    }
    if (drop[i]) {
      result.dropped.push_back(i);
    } else {
      result.retained.push_back(samples[i]);
    }
  }
  return result;
}

DifficultyFilterResult difficulty_filter(std::span<const TrainingSample> samples,
                                         const Registry& registry, Gateway& gateway,
                                         const DifficultyFilterOptions& options) {
  DifficultyFilterResult result;
  result.judgments.assign(samples.size(), Difficulty::Malformed);
  // Unknown tasks are configuration errors, not per-sample failures.
  for (const auto& s : samples) get_task(registry, s.pair.task_name);

  parallel_for(samples.size(), options.jobs, [&](std::size_t i) {
    const auto& s = samples[i];
    const auto& task = get_task(registry, s.pair.task_name);
    try {
      CompletionRequest req;
      req.prompt = render_difficulty_prompt(task, s.pair.query, s.pair.positive, s.pair.bindings);
      req.model_name = options.model;
      req.temperature = options.temperature;
      req.correlation_id = "difficulty:" + std::to_string(i);
      result.judgments[i] = parse_difficulty(gateway.complete(req).text);
    } catch (const Error& e) {
      spdlog::warn("difficulty judgment failed for sample {}: {}", i, e.what());
      result.judgments[i] = Difficulty::Malformed;
    }
  });
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto d = result.judgments[i];
    ++result.counts[d];
    if (!is_retainable(d)) continue;
    TrainingSample kept = samples[i];
    kept.difficulty = d;
    result.retained.push_back(std::move(kept));
  }
  return result;
}

}  // namespace coder_forge
