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

// Acceptance suite: one PASS/FAIL line per criterion, each under a
// wall-clock limit. Exits nonzero when any line fails.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "coder_forge/contrastive_ref.hpp"
#include "coder_forge/curriculum.hpp"
#include "coder_forge/eval_harness.hpp"
#include "coder_forge/prompt_engine.hpp"
#include "coder_forge/synth_pipeline.hpp"
#include "test_support.hpp"

namespace cf = coder_forge;
namespace t = coder_forge::testing;

namespace {

/// Records the first failed expectation and counts the rest.
class Check {
 public:
  void expect(bool cond, const std::string& what) {
    ++checks_;
    if (cond) return;
    ++failures_;
    if (first_.empty()) first_ = what;
  }
  bool ok() const { return failures_ == 0; }
  std::string summary() const {
    if (ok()) return std::to_string(checks_) + " checks";
    return std::to_string(failures_) + "/" + std::to_string(checks_) + " checks failed; first: " + first_;
  }

 private:
  std::size_t checks_ = 0;
  std::size_t failures_ = 0;
  std::string first_;
};

std::string fmt_double(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

bool run_criterion(int number, const std::string& name, double limit_s,
                   const std::function<void(Check&)>& body) {
  Check check;
  std::string error;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(check);
  } catch (const std::exception& e) {
    error = e.what();
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = elapsed < limit_s;
  const bool pass = error.empty() && check.ok() && in_time;
  std::ostringstream line;
  line.setf(std::ios::fixed);
  line.precision(2);
  line << (pass ? "PASS" : "FAIL") << "  [" << number << "] " << name << "  (" << elapsed << "s / limit "
       << limit_s << "s)  ";
  if (!error.empty()) line << "exception: " << error;
  else line << check.summary();
  if (!in_time) line << "; over time limit";
  std::cout << line.str() << std::endl;
  return pass;
}

// ---------------------------------------------------------------- [1]

void prompt_fidelity(Check& c) {
  const auto registry = cf::load_default_registry();
  const std::string add_code = "def add(a, b):\n    return a + b";
  const cf::Bindings python = {{"code_language", "Python"}, {"language", "English"}};
  const auto& summary = cf::get_task(registry, "Code Summary Retrieval");
  c.expect(cf::render_brainstorm_prompt(cf::MajorTaskType::Text2Code,
                                        cf::default_seed_tasks(registry, cf::MajorTaskType::Text2Code))
                   .body == t::read_file(t::golden_dir() / "brainstorm_text2code.txt"),
           "brainstorm golden");
  c.expect(cf::render_generation_prompt(summary, 0, "Code", add_code, python).body ==
               t::read_file(t::golden_dir() / "generation_code_summary.txt"),
           "generation golden");
  c.expect(cf::render_annotation_prompt(cf::get_task(registry, "Code Contest Retrieval"),
                                        "Read two integers and print their sum.",
                                        "a, b = map(int, input().split())\nprint(a + b)")
                   .body == t::read_file(t::golden_dir() / "annotation_code_contest.txt"),
           "annotation golden");
  c.expect(cf::render_difficulty_prompt(summary, add_code, "Adds two numbers and returns their sum.").body ==
               t::read_file(t::golden_dir() / "difficulty_code_summary.txt"),
           "difficulty golden");

  c.expect(registry.tasks().size() == 47, "registry has 47 tasks");
  const cf::Bindings all = {{"code_language", "Go"}, {"src_code_language", "Go"},
                        {"tgt_code_language", "Rust"}, {"language", "English"}};
  std::size_t clean = 0;
  for (const auto& task : registry.tasks()) {
    bool ok = true;
    for (std::size_t i = 0; i < task.generation_steps.size(); ++i) {
      ok = ok && cf::find_placeholders(cf::render_generation_prompt(task, i, "Code", "x := 1", all).body).empty();
    }
    ok = ok && cf::find_placeholders(cf::render_annotation_prompt(task, "q", "d", all).body).empty();
    ok = ok && cf::find_placeholders(cf::render_difficulty_prompt(task, "q", "d", all).body).empty();
    const std::vector<cf::SeedTask> seed = {{task.name, cf::render_task_text(task.task_instruction, all)}};
    ok = ok && cf::find_placeholders(cf::render_brainstorm_prompt(task.major_type, seed).body).empty();
    c.expect(ok, "residual placeholder in " + task.name);
    clean += ok;
  }
  c.expect(clean == 47, "47/47 tasks render cleanly");
}

// ---------------------------------------------------------------- [2]

using Rule = cf::MockGateway::Rule;

std::string marker(int i) { return "marker_" + std::to_string(i) + "_end"; }

void e2e_synthesis(Check& c) {
  const auto registry = cf::load_default_registry();
  std::vector<cf::CodeDocument> docs;
  for (int i = 0; i < 5; ++i) {
    docs.push_back(cf::CodeDocument::make("def scale_" + std::to_string(i) + "(values, factor):\n    return [v * factor + " +
                                              std::to_string(i) + " for v in values]  # " + marker(i),
                                          "Python"));
  }
  // Negatives come from an unrelated vocabulary so every one sits below the ceiling.
  const std::vector<std::string> vocab = {"river", "mountain", "cloud", "forest", "meadow", "harbor",
                                          "valley", "desert", "glacier", "canyon", "island", "prairie"};
  std::mt19937_64 rng(99);
  std::vector<cf::CorpusText> negatives;
  for (int i = 0; i < 60; ++i) {
    std::string text;
    for (int w = 0; w < 6; ++w) text += vocab[rng() % vocab.size()] + " ";
    text += "item" + std::to_string(i);
    negatives.push_back({cf::text_id(text), text});
  }

  const std::vector<std::string> summary_answers = {"1", "0", "1", "the pair looks fine", "2"};
  const std::vector<std::string> sql_answers = {"1", "1", " 1\n", "0", "Yes"};
  std::vector<Rule> rules;
  for (int i = 0; i < 5; ++i) {
    rules.push_back({std::nullopt, {marker(i), "judge whether the text summarizes the code"},
                     cf::TemplateId::Annotation, std::nullopt, {summary_answers[i]}});
    rules.push_back({std::nullopt, {marker(i), "judge whether the code is an appropriate response"},
                     cf::TemplateId::Annotation, std::nullopt, {sql_answers[i]}});
    const std::string echo = "scale_" + std::to_string(i) + " values factor return v factor " + marker(i);
    rules.push_back({std::nullopt, {marker(i), "generate a summary"}, cf::TemplateId::Generation, std::nullopt,
                     {"Summary of " + echo}});
    rules.push_back({std::nullopt, {marker(i), "generate a text query"}, cf::TemplateId::Generation,
                     std::nullopt, {"Query for " + echo}});
  }

  t::TempDir dir;
  std::vector<std::string> outputs;
  for (int run = 0; run < 2; ++run) {
    cf::MockGateway gateway(rules);
    cf::HashEmbedder embedder(5);
    cf::NegativeMiner miner(negatives, embedder, cf::MiningConfig{});
    cf::SynthesisConfig cfg;
    cfg.task_names = {"Code Summary Retrieval", "Text to SQL Retrieval"};
    cfg.programming_languages = {"Python"};
    cfg.samples_per_cell = 5;
    cfg.seed = 42;
    cfg.jobs = 4;
    cfg.output = dir / ("run" + std::to_string(run) + ".jsonl");
    cf::SynthesisPipeline pipeline(registry, gateway, &miner, cfg);
    const auto stats = pipeline.run(docs);
    const auto& s = stats.totals;
    c.expect(s.generated == 10, "generated " + std::to_string(s.generated) + " != 10");
    c.expect(s.accepted == 5, "accepted " + std::to_string(s.accepted) + " != 5");
    c.expect(s.rejected == 3, "rejected " + std::to_string(s.rejected) + " != 3");
    c.expect(s.malformed == 2, "malformed " + std::to_string(s.malformed) + " != 2");
    c.expect(s.failed == 0, "no failed items");
    c.expect(stats.per_task.at("Code Summary Retrieval").accepted == 2, "Code Summary accepted 2");
    c.expect(stats.per_task.at("Text to SQL Retrieval").accepted == 3, "Text to SQL accepted 3");

    const auto samples = cf::read_samples(cfg.output);
    c.expect(samples.size() == 5, "5 samples persisted");
    for (const auto& sample : samples) {
      c.expect(sample.pair.label == cf::AnnotationLabel::Accept, "persisted label is accept");
      std::set<std::string> ids;
      const auto q = embedder.embed_one(sample.pair.query).normalized();
      const double pos = cf::dot(q, embedder.embed_one(sample.pair.positive).normalized());
      const double ceiling = 0.95 * pos;
      c.expect(std::abs(ceiling - sample.mining.ceiling) < 1e-12, "ceiling recorded");
      c.expect(sample.mining.filled_above_ceiling == 0, "no above-ceiling fill");
      for (const auto& n : sample.negatives) {
        ids.insert(n.id);
        const double score = cf::dot(q, embedder.embed_one(n.text).normalized());
        c.expect(score < ceiling, "negative " + fmt_double(score) + " not below ceiling " + fmt_double(ceiling));
        c.expect(n.text != sample.pair.positive, "negative differs from positive");
      }
      c.expect(ids.size() == 15, "15 distinct negatives");
    }
    outputs.push_back(t::read_file(cfg.output));
  }
  c.expect(!outputs[0].empty() && outputs[0] == outputs[1], "two seeded runs byte-identical");
}

// ---------------------------------------------------------------- [3]

void mining_oracle(Check& c) {
  std::mt19937_64 rng(2024);
  const std::size_t dim = 32;
  for (int instance = 0; instance < 50; ++instance) {
    cf::FixtureEmbedder embedder;
    const auto q = t::random_gaussian(rng, dim);
    auto pos = q;
    for (auto& x : pos) x += std::normal_distribution<double>(0.0, 0.5)(rng);
    embedder.add("query", cf::EmbeddingVector(q));
    embedder.add("positive", cf::EmbeddingVector(pos));
    const std::size_t n = 50 + rng() % 251;  // at most 300 documents
    std::vector<cf::CorpusText> corpus;
    std::vector<t::OracleDoc> oracle;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string id = "doc" + std::to_string(i);
      const std::string text = "text " + std::to_string(instance) + "/" + std::to_string(i);
      const auto v = t::random_gaussian(rng, dim);
      embedder.add(text, cf::EmbeddingVector(v));
      corpus.push_back({id, text});
      oracle.push_back({id, text, v});
    }
    cf::NegativeMiner miner(corpus, embedder, cf::MiningConfig{});
    const auto result = miner.mine("query", "positive", "none", "k" + std::to_string(instance));
    std::vector<std::string> got;
    for (const auto& neg : result.negatives) got.push_back(neg.id);
    const auto want = t::brute_force_mine(q, pos, "query", "positive", "none", oracle, 15, 0.95);
    c.expect(got == want, "instance " + std::to_string(instance) + " differs from oracle");
    c.expect(result.metadata.filled == 0, "instance " + std::to_string(instance) + " used the fill rule");
  }
}

// ---------------------------------------------------------------- [4]

cf::RetrievalRun ranked(const std::string& qid, const std::vector<std::string>& ids) {
  cf::RetrievalRun run;
  double score = 1.0;
  for (const auto& id : ids) run.results[qid].push_back({id, score -= 0.01});
  return run;
}

void ndcg_oracle(Check& c) {
  const cf::Qrels single = {{"q", {{"a", 1}}}};
  c.expect(std::abs(cf::ndcg_at_k(ranked("q", {"a", "b"}), single, 10).mean - 1.0) < 1e-12, "hand case 1.0");
  c.expect(std::abs(cf::ndcg_at_k(ranked("q", {"b", "a"}), single, 10).mean - 0.63093) < 5e-6,
           "hand case 0.63093");
  c.expect(cf::ndcg_at_k(ranked("q", {"b", "c"}), single, 10).mean == 0.0, "hand case 0.0");

  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int f = 0; f < 100; ++f) {
    cf::Qrels qrels;
    cf::RetrievalRun run;
    const std::size_t queries = 1 + rng() % 30;
    for (std::size_t qi = 0; qi < queries; ++qi) {
      const std::string qid = "q" + std::to_string(qi);
      const int judged = 1 + static_cast<int>(rng() % 8);
      for (int j = 0; j < judged; ++j) qrels[qid]["d" + std::to_string(rng() % 50)] = static_cast<int>(rng() % 4);
      if (rng() % 8 == 0) continue;  // some queries have no run at all
      std::vector<std::string> ids;
      for (int d = 0; d < 50; ++d) ids.push_back("d" + std::to_string(d));
      std::shuffle(ids.begin(), ids.end(), rng);
      ids.resize(rng() % 30);
      run.results[qid] = ranked(qid, ids).results[qid];
    }
    const std::size_t k = (f % 3 == 0) ? 5 : 10;
    const auto got = cf::ndcg_at_k(run, qrels, k);
    const double want = t::oracle_ndcg_mean(run, qrels, k);
    worst = std::max(worst, std::abs(got.mean - want));
    for (const auto& [_, v] : got.per_query) c.expect(v >= 0.0 && v <= 1.0 + 1e-12, "NDCG within [0, 1]");
  }
  c.expect(worst < 1e-9, "max oracle deviation " + fmt_double(worst));
}

// ---------------------------------------------------------------- [5]

void loss_checks(Check& c) {
  const cf::EmbeddingVector e1({1, 0, 0}), e2({0, 1, 0}), e3({0, 0, 1});
  auto rel = [](double got, double want) { return std::abs(got - want) / std::abs(want); };
  c.expect(rel(cf::infonce_loss({e1, e2, {e3}}, cf::LossConfig{1.0}), std::log(2.0)) < 1e-12, "ln 2");
  c.expect(rel(cf::infonce_loss({e1, e1, {e2}}, cf::LossConfig{1.0}), std::log1p(std::exp(-1.0))) < 1e-12,
           "ln(1 + e^-1)");
  c.expect(rel(cf::infonce_loss({e1, e1, {e2}}, cf::LossConfig{0.02}), std::log1p(std::exp(-50.0))) < 1e-12,
           "log1p(e^-50)");

  std::mt19937_64 rng(31);
  for (const auto& [tau, bound] : {std::pair{1.0, 1e-5}, std::pair{0.02, 1e-4}}) {
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const std::size_t dim = 4 + rng() % 29;
      cf::LossInstance inst{t::random_vector(rng, dim), t::random_vector(rng, dim), {}};
      const std::size_t negs = 1 + rng() % 15;
      for (std::size_t j = 0; j < negs; ++j) inst.negs.push_back(t::random_vector(rng, dim));
      const cf::LossConfig cfg{tau};
      worst = std::max(worst, cf::gradient_relative_error(cf::infonce_grad(inst, cfg),
                                                          cf::finite_difference_grad(inst, cfg)));
    }
    c.expect(worst < bound, "tau " + fmt_double(tau) + " worst FD error " + fmt_double(worst));
  }
}

// ---------------------------------------------------------------- [6]

void stage3_filters(Check& c) {
  // Query on axis 0; document i has cosine sims[i] with it.
  cf::FixtureEmbedder embedder;
  std::vector<cf::CorpusText> corpus;
  const double sims[] = {0.9, 0.8, 0.7, 0.6, 0.5, 0.4};
  for (int i = 0; i < 6; ++i) {
    std::vector<double> v(8, 0.0);
    v[0] = sims[i];
    v[i + 1] = std::sqrt(1 - sims[i] * sims[i]);
    const std::string text = "document at rank " + std::to_string(i + 1);
    embedder.add(text, cf::EmbeddingVector(v));
    corpus.push_back({cf::text_id(text), text});
  }
  std::vector<cf::TrainingSample> samples;
  for (int rank = 1; rank <= 6; ++rank) {
    auto s = t::make_sample(static_cast<std::size_t>(rank));
    s.pair.positive = "document at rank " + std::to_string(rank);
    s.pair.positive_id = cf::text_id(s.pair.positive);
    std::vector<double> q(8, 0.0);
    q[0] = 1.0;
    embedder.add(s.pair.query, cf::EmbeddingVector(q));
    samples.push_back(s);
  }
  cf::E5FilterOptions opts;
  opts.corpus = corpus;
  const auto e5 = cf::e5_simple_filter(samples, embedder, opts);
  c.expect(e5.dropped == std::vector<std::size_t>{0, 1, 2}, "ranks 1-3 dropped");
  c.expect(e5.retained.size() == 3 && e5.retained.front() == samples[3], "rank 4 first retained");

  const auto registry = cf::load_default_registry();
  const std::vector<std::string> answers = {"No", "Yes, simple", "Yes, medium", "Yes, hard",
                                            "I cannot tell", "Yes, hard", "Yes, medium", "No"};
  std::vector<Rule> rules;
  std::vector<cf::TrainingSample> judged;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    judged.push_back(t::make_sample(100 + i));
    rules.push_back({std::nullopt, {judged.back().pair.query}, cf::TemplateId::Difficulty, std::nullopt, {answers[i]}});
  }
  cf::MockGateway gateway(rules);
  cf::DifficultyFilterOptions dopts;
  dopts.jobs = 4;
  const auto d = cf::difficulty_filter(judged, registry, gateway, dopts);
  c.expect(d.retained.size() == 4, "4 of 8 retained");
  std::set<cf::Difficulty> kept;
  for (const auto& s : d.retained) kept.insert(*s.difficulty);
  c.expect(kept == std::set<cf::Difficulty>{cf::Difficulty::Medium, cf::Difficulty::Hard}, "kept {Medium, Hard}");
  c.expect(d.retained.size() == 4 && d.retained[0].pair == judged[2].pair && d.retained[3].pair == judged[6].pair,
           "input order preserved");
}

// ---------------------------------------------------------------- [7]

void dedup_checks(Check& c) {
  cf::EvalBenchmark b;
  b.name = "remap";
  b.task_instruction = "Given a question, retrieve code.";
  b.queries = {{"q1", "question"}};
  b.corpus = {{"d1", "x"}, {"d2", "x"}, {"d3", "y"}};
  b.qrels = {{"q1", {{"d2", 1}}}};
  const auto out = cf::dedup_benchmark(b);
  c.expect(out.corpus == std::vector<std::pair<std::string, std::string>>{{"d1", "x"}, {"d3", "y"}},
           "remap corpus");
  c.expect(out.qrels == cf::Qrels{{"q1", {{"d1", 1}}}}, "remap qrels");

  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const auto bench = t::random_benchmark(rng, 10 + rng() % 40, 20 + rng() % 80, 0.25);
    cf::DedupDelta delta;
    const auto once = cf::dedup_benchmark(bench, &delta);
    once.validate();
    c.expect(cf::dedup_benchmark(once) == once, "idempotent");
    c.expect(once.queries.size() <= bench.queries.size() && once.corpus.size() <= bench.corpus.size(),
             "monotone counts");
    c.expect(delta.queries_removed + once.queries.size() == bench.queries.size() &&
                 delta.docs_removed + once.corpus.size() == bench.corpus.size(),
             "delta consistent");
  }
}

// ---------------------------------------------------------------- [8]

void curriculum_checks(Check& c) {
  std::mt19937_64 rng(8);
  const cf::SourceKind kinds[] = {cf::SourceKind::TextRetrieval, cf::SourceKind::TextSts,
                                  cf::SourceKind::CodeExisting, cf::SourceKind::CodeSynthetic};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<cf::DataSourceEntry> sources;
    const std::size_t n = 1 + rng() % 8;
    for (std::size_t i = 0; i < n; ++i) {
      sources.push_back({"src" + std::to_string(i), kinds[rng() % 4], rng() % 1000, 0.1 + (rng() % 50) / 10.0});
    }
    bool text = false, code = false;
    for (const auto& s : sources) {
      text = text || cf::is_text_kind(s.kind);
      code = code || cf::is_code_kind(s.kind);
    }
    if (!(text && code)) {
      bool threw = false;
      try {
        cf::plan_stages(sources);
      } catch (const cf::ConfigError&) {
        threw = true;
      }
      c.expect(threw, "input lacking text or code rejected");
      continue;
    }
    const auto stages = cf::plan_stages(sources);
    for (const auto& e : stages[0].entries) c.expect(cf::is_text_kind(e.kind), "stage 1 text only");
    for (const auto& e : stages[2].entries) c.expect(cf::is_code_kind(e.kind), "stage 3 code only");
    c.expect(stages[1].entries == sources, "stage 2 keeps every source");
    c.expect(stages[0].learning_rate_hint == 1e-4 && stages[1].learning_rate_hint == 1e-4 &&
                 stages[2].learning_rate_hint == 1e-5,
             "lr hints 1e-4, 1e-4, 1e-5");
  }
  auto rejects = [&](std::vector<cf::DataSourceEntry> sources, double lr1, double lr3, const std::string& what) {
    try {
      cf::plan_stages(sources, lr1, lr3);
      c.expect(false, what);
    } catch (const cf::ConfigError&) {
      c.expect(true, what);
    }
  };
  const std::vector<cf::DataSourceEntry> good = {{"t", cf::SourceKind::TextRetrieval, 1, 1.0},
                                                 {"c", cf::SourceKind::CodeSynthetic, 1, 1.0}};
  rejects({}, 1e-4, 1e-5, "empty sources rejected");
  rejects({good[0]}, 1e-4, 1e-5, "text-only rejected");
  rejects({good[1]}, 1e-4, 1e-5, "code-only rejected");
  rejects({good[0], {"", cf::SourceKind::CodeExisting, 1, 1.0}}, 1e-4, 1e-5, "empty path rejected");
  rejects({good[0], {"c", cf::SourceKind::CodeExisting, 1, -2.0}}, 1e-4, 1e-5, "negative weight rejected");
  rejects(good, 0.0, 1e-5, "zero lr rejected");
  rejects(good, 1e-4, -1e-5, "negative lr rejected");
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  struct Entry {
    const char* name;
    double limit;
    void (*fn)(Check&);
  };
  const Entry entries[] = {
      {"prompt fidelity: 4 goldens, 47/47 tasks clean", 5.0, prompt_fidelity},
      {"end-to-end mock synthesis: counts, negatives, byte-identical reruns", 30.0, e2e_synthesis},
      {"mining oracle: 50 instances exact set and order", 60.0, mining_oracle},
      {"NDCG oracle: 100 fixtures within 1e-9 and hand cases", 10.0, ndcg_oracle},
      {"loss hand values and finite-difference gradients", 30.0, loss_checks},
      {"stage-3 filters: rank 3 vs 4 and {Medium, Hard}", 10.0, stage3_filters},
      {"dedup: remap, idempotence, monotone over 50 benchmarks", 10.0, dedup_checks},
      {"curriculum: stage kinds, lr hints, invalid inputs", 5.0, curriculum_checks},
  };
  int failed = 0;
  int number = 0;
  for (const auto& e : entries) failed += !run_criterion(++number, e.name, e.limit, e.fn);
  std::cout << (failed == 0 ? "ALL PASS" : std::to_string(failed) + " FAILED") << " (" << number
            << " criteria)" << std::endl;
  return failed == 0 ? 0 : 1;
}
