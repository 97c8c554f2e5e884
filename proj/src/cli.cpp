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

#include "coder_forge/cli.hpp"

#include <cstdlib>
#include <memory>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "coder_forge/contrastive_ref.hpp"
#include "coder_forge/corpus_store.hpp"
#include "coder_forge/curriculum.hpp"
#include "coder_forge/embedder.hpp"
#include "coder_forge/eval_harness.hpp"
#include "coder_forge/hardneg_miner.hpp"
#include "coder_forge/llm_gateway.hpp"
#include "coder_forge/prompt_engine.hpp"
#include "coder_forge/synth_pipeline.hpp"
#include "coder_forge/task_registry.hpp"

namespace coder_forge {

namespace {

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  std::string log_level = "info";
  std::string registry;
  std::string languages;
};

struct GatewayOptions {
  std::string mock;
  std::size_t concurrency = 8;
  std::int64_t tokens_per_minute = 0;
  int max_retries = 3;
};

struct EmbedderOptions {
  std::string mock;
  std::string model;
};

struct MiningOptions {
  std::size_t k = kDefaultNegatives;
  double margin = 0.95;
  std::size_t pool = 100;
  std::string fill_rule = "random_below_ceiling";

  MiningConfig config(std::uint64_t seed) const {
    MiningConfig c;
    c.k_negatives = k;
    c.margin = margin;
    c.candidate_pool = pool;
    c.fill_rule = parse_fill_rule(fill_rule);
    c.seed = seed;
    c.validate();
    return c;
  }
};

void add_gateway_flags(CLI::App* cmd, GatewayOptions& g) {
  cmd->add_option("--mock", g.mock,
                  "Mock fixture JSONL answering prompts offline (default: HTTP endpoint from "
                  "CODER_FORGE_API_BASE / CODER_FORGE_API_KEY)");
  cmd->add_option("--concurrency", g.concurrency, "Maximum in-flight HTTP requests")->capture_default_str();
  cmd->add_option("--tpm", g.tokens_per_minute, "Token budget per minute, 0 for unlimited")
      ->capture_default_str();
  cmd->add_option("--max-retries", g.max_retries, "Retries for 429/5xx/transport errors")
      ->capture_default_str();
}

void add_embedder_flags(CLI::App* cmd, EmbedderOptions& e) {
  cmd->add_option("--mock-embedder", e.mock,
                  "Offline embedder: seed:N[,dim:D] (hashed features) or fixture:PATH");
  cmd->add_option("--embed-model", e.model,
                  "Remote embedding model served at CODER_FORGE_API_BASE/embeddings");
}

void add_mining_flags(CLI::App* cmd, MiningOptions& m) {
  cmd->add_option("--k", m.k, "Hard negatives per sample")->capture_default_str();
  cmd->add_option("--margin", m.margin, "Negatives must score below margin x positive score")
      ->capture_default_str();
  cmd->add_option("--pool", m.pool, "Ranked candidate pool scanned before the fill rule")
      ->capture_default_str();
  cmd->add_option("--fill-rule", m.fill_rule, "error | random_below_ceiling")
      ->check(CLI::IsMember({"error", "random_below_ceiling"}))
      ->capture_default_str();
}

std::unique_ptr<Gateway> make_gateway(const GatewayOptions& g) {
  if (!g.mock.empty()) return std::make_unique<MockGateway>(MockGateway::load_rules(g.mock));
  auto options = HttpGatewayOptions::from_env();
  options.limits.max_concurrency = g.concurrency;
  options.limits.tokens_per_minute = g.tokens_per_minute;
  options.max_retries = g.max_retries;
  return std::make_unique<HttpChatGateway>(std::move(options));
}

/// With `fallback_seed`, a missing embedder flag selects the hashed mock.
std::unique_ptr<Embedder> make_embedder(const EmbedderOptions& e,
                                        std::optional<std::uint64_t> fallback_seed) {
  if (!e.mock.empty()) return make_mock_embedder(e.mock);
  if (!e.model.empty()) {
    const char* base = std::getenv("CODER_FORGE_API_BASE");
    if (!base || !*base) throw ConfigError("--embed-model needs CODER_FORGE_API_BASE");
    const char* key = std::getenv("CODER_FORGE_API_KEY");
    return std::make_unique<HttpEmbedder>(base, key ? key : "", e.model);
  }
  if (fallback_seed) {
    spdlog::info("no embedder given; using hashed mock embedder seed:{}", *fallback_seed);
    return std::make_unique<HashEmbedder>(*fallback_seed);
  }
  throw ConfigError("no embedder: pass --mock-embedder or --embed-model");
}

Registry load_registry_from(const GlobalOptions& g) {
  if (g.registry.empty()) return load_default_registry();
  std::optional<std::filesystem::path> langs;
  if (!g.languages.empty()) langs = g.languages;
  return load_registry(g.registry, langs);
}

std::vector<std::string> known_languages(const Registry& r) { return r.programming_languages(); }

void emit(std::ostream& out, const Json& summary) {
  out << summary.dump(-1, ' ', false, Json::error_handler_t::replace) << '\n';
  out.flush();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
  auto logger = std::make_shared<spdlog::logger>("coder-forge", sink);
  logger->set_pattern("[%l] %v");
  auto previous = spdlog::default_logger();
  spdlog::set_default_logger(logger);
  struct RestoreLogger {
    std::shared_ptr<spdlog::logger> prev;
    ~RestoreLogger() { spdlog::set_default_logger(prev); }
  } restore{previous};

  CLI::App app{"coder-forge: synthesize, mine, filter and evaluate code-retrieval training data",
               "coder-forge"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  GlobalOptions global;
  app.add_option("--seed", global.seed, "Seed for every randomized step")->capture_default_str();
  app.add_option("--jobs", global.jobs, "Worker threads")->capture_default_str();
  app.add_option("--log-level", global.log_level, "trace|debug|info|warn|error|off")
      ->capture_default_str();
  app.add_option("--registry", global.registry, "Task registry JSONL (default: bundled 47 tasks)");
  app.add_option("--languages", global.languages,
                 "Programming language list (default: languages.txt beside the registry)");

  Json summary;
  int exit_code = kExitOk;
  std::function<void()> action;

  // ----------------------------------------------------------------- synth
  auto* synth = app.add_subcommand("synth", "Generate, annotate and mine training samples");
  struct {
    std::vector<std::string> tasks, nls{"English"}, pls, pairs;
    std::size_t count = 1, attempt_cap = 3, min_chars = 50, max_chars = 100000;
    std::string corpus, neg_corpus, out, checkpoint, model = std::string(kDefaultModel);
    double gen_temperature = kDefaultGenerationTemperature, judge_temperature = kDefaultJudgeTemperature;
    int max_tokens = 2048;
    bool retry_malformed = false, resume = false, no_negatives = false;
    GatewayOptions gateway;
    EmbedderOptions embedder;
    MiningOptions mining;
  } so;
  synth->add_option("--task", so.tasks, "Task name (repeatable)")->required();
  synth->add_option("--nl", so.nls, "Natural language: English | Chinese (repeatable)")->capture_default_str();
  synth->add_option("--pl", so.pls, "Programming language (repeatable)");
  synth->add_option("--pair", so.pairs, "src:tgt pair for translation tasks (repeatable)");
  synth->add_option("--count", so.count, "Accepted samples per task/language cell")->capture_default_str();
  synth->add_option("--attempt-cap", so.attempt_cap, "Documents tried per cell = cap x count")
      ->capture_default_str();
  synth->add_option("--corpus", so.corpus, "Code corpus JSONL {language, content, source}")->required();
  synth->add_option("--min-chars", so.min_chars, "Minimum document length")->capture_default_str();
  synth->add_option("--max-chars", so.max_chars, "Maximum document length")->capture_default_str();
  synth->add_option("--neg-corpus", so.neg_corpus, "Corpus to mine negatives from (default: --corpus)");
  synth->add_option("--out", so.out, "Output samples JSONL")->required();
  synth->add_option("--checkpoint", so.checkpoint, "Checkpoint file (default: <out>.ckpt)");
  synth->add_flag("--resume", so.resume, "Append to --out and skip checkpointed work");
  synth->add_option("--model", so.model, "Generation and judge model")->capture_default_str();
  synth->add_option("--gen-temperature", so.gen_temperature, "Sampling temperature for generation")
      ->capture_default_str();
  synth->add_option("--judge-temperature", so.judge_temperature, "Temperature for annotation")
      ->capture_default_str();
  synth->add_option("--max-tokens", so.max_tokens, "Max output tokens per call")->capture_default_str();
  synth->add_flag("--retry-malformed", so.retry_malformed, "Re-ask once when an annotation is malformed");
  synth->add_flag("--no-negatives", so.no_negatives, "Write verified pairs without mining negatives");
  add_gateway_flags(synth, so.gateway);
  add_embedder_flags(synth, so.embedder);
  add_mining_flags(synth, so.mining);
  synth->callback([&] {
    action = [&] {
      const Registry registry = load_registry_from(global);
      IngestOptions ingest;
      ingest.min_chars = so.min_chars;
      ingest.max_chars = so.max_chars;
      ingest.known_languages = known_languages(registry);
      IngestStats ingest_stats;
      const auto corpus = ingest_corpus(so.corpus, ingest, &ingest_stats);
      spdlog::info("ingested {} of {} corpus records", ingest_stats.accepted, ingest_stats.records);

      SynthesisConfig cfg;
      cfg.task_names = so.tasks;
      cfg.natural_languages = so.nls;
      for (const auto& pl : so.pls) {
        auto canon = canonical_language(pl, registry.programming_languages());
        if (!canon) throw ConfigError("unknown programming language '" + pl + "'");
        cfg.programming_languages.push_back(*canon);
      }
      for (const auto& p : so.pairs) {
        auto lp = parse_language_pair(p);
        for (auto* side : {&lp.source, &lp.target}) {
          auto canon = canonical_language(*side, registry.programming_languages());
          if (!canon) throw ConfigError("unknown programming language '" + *side + "'");
          *side = *canon;
        }
        cfg.translation_pairs.push_back(lp);
      }
      cfg.samples_per_cell = so.count;
      cfg.attempt_cap_factor = so.attempt_cap;
      cfg.seed = global.seed;
      cfg.model = so.model;
      cfg.generation_temperature = so.gen_temperature;
      cfg.judge_temperature = so.judge_temperature;
      cfg.max_output_tokens = so.max_tokens;
      cfg.retry_malformed = so.retry_malformed;
      cfg.jobs = global.jobs;
      cfg.output = so.out;
      if (!so.checkpoint.empty()) cfg.checkpoint = so.checkpoint;
      cfg.resume = so.resume;
      cfg.validate(registry);

      auto gateway = make_gateway(so.gateway);
      std::unique_ptr<Embedder> embedder;
      std::unique_ptr<NegativeMiner> miner;
      if (!so.no_negatives) {
        embedder = make_embedder(so.embedder, so.gateway.mock.empty()
                                                  ? std::nullopt
                                                  : std::optional<std::uint64_t>(global.seed));
        std::vector<CorpusText> neg;
        if (so.neg_corpus.empty()) {
          neg = corpus_texts(corpus);
        } else {
          IngestOptions neg_ingest = ingest;
          neg_ingest.min_chars = 1;
          neg = corpus_texts(ingest_corpus(so.neg_corpus, neg_ingest));
        }
        miner = std::make_unique<NegativeMiner>(std::move(neg), *embedder, so.mining.config(global.seed));
      }
      SynthesisPipeline pipeline(registry, *gateway, miner.get(), cfg);
      const auto stats = pipeline.run(corpus);
      summary = stats.to_json();
      summary["output"] = so.out;
      summary["ingest"] = ingest_stats.to_json();
      if (stats.totals.failed > 0) exit_code = kExitPartial;
    };
  });

  // ------------------------------------------------------------ brainstorm
  auto* brainstorm = app.add_subcommand("brainstorm", "Propose new tasks for manual review");
  struct {
    std::string type, out;
    std::vector<std::string> models{std::string(kDefaultModel)}, seed_tasks;
    double temperature = kDefaultGenerationTemperature;
    GatewayOptions gateway;
  } bo;
  brainstorm->add_option("--type", bo.type, "Text2Code | Code2Text | Code2Code | Hybrid")->required();
  brainstorm->add_option("--model", bo.models, "Model to ask (repeatable)")->capture_default_str();
  brainstorm->add_option("--seed-task", bo.seed_tasks, "Registry task used as an example (repeatable)");
  brainstorm->add_option("--temperature", bo.temperature, "Sampling temperature")->capture_default_str();
  brainstorm->add_option("--out", bo.out, "Review JSONL")->required();
  add_gateway_flags(brainstorm, bo.gateway);
  brainstorm->callback([&] {
    action = [&] {
      const Registry registry = load_registry_from(global);
      const auto type = parse_major_type(bo.type);
      std::vector<SeedTask> seeds;
      if (bo.seed_tasks.empty()) {
        seeds = default_seed_tasks(registry, type);
      } else {
        for (const auto& name : bo.seed_tasks) {
          const auto& t = get_task(registry, name);
          seeds.push_back({t.name, t.task_instruction});
        }
      }
      auto gateway = make_gateway(bo.gateway);
      const auto result = brainstorm_tasks(type, seeds, registry, *gateway, bo.models, bo.temperature);
      write_brainstorm_review(result, type, bo.out);
      std::size_t dups = 0;
      for (const auto& c : result.candidates) dups += c.duplicate;
      summary = {{"candidates", result.candidates.size()},
                 {"duplicates", dups},
                 {"failed_models", result.failures.size()},
                 {"output", bo.out}};
      if (!result.failures.empty()) exit_code = kExitPartial;
    };
  });

  // ------------------------------------------------------------------ mine
  auto* mine = app.add_subcommand("mine", "Attach hard negatives to verified pairs");
  struct {
    std::string in, corpus, out;
    std::size_t min_chars = 1, max_chars = 100000;
    EmbedderOptions embedder;
    MiningOptions mining;
  } mo;
  mine->add_option("--in", mo.in, "Verified pairs JSONL")->required();
  mine->add_option("--corpus", mo.corpus, "Negative corpus JSONL {language, content, source}")->required();
  mine->add_option("--min-chars", mo.min_chars, "Minimum corpus document length")->capture_default_str();
  mine->add_option("--max-chars", mo.max_chars, "Maximum corpus document length")->capture_default_str();
  mine->add_option("--out", mo.out, "Output samples JSONL (default: <in>.mined.jsonl)");
  add_embedder_flags(mine, mo.embedder);
  add_mining_flags(mine, mo.mining);
  mine->callback([&] {
    action = [&] {
      const Registry registry = load_registry_from(global);
      const auto pairs = read_pairs(mo.in);
      IngestOptions ingest;
      ingest.min_chars = mo.min_chars;
      ingest.max_chars = mo.max_chars;
      ingest.known_languages = known_languages(registry);
      const auto docs = ingest_corpus(mo.corpus, ingest);
      auto embedder = make_embedder(mo.embedder, global.seed);
      const auto cfg = mo.mining.config(global.seed);
      NegativeMiner miner(corpus_texts(docs), *embedder, cfg);

      std::vector<std::optional<TrainingSample>> samples(pairs.size());
      std::vector<std::string> errors(pairs.size());
      parallel_for(pairs.size(), global.jobs, [&](std::size_t i) {
        if (pairs[i].label != AnnotationLabel::Accept) {
          errors[i] = "pair is not labeled accept";
          return;
        }
        try {
          samples[i] = assemble_sample(pairs[i], miner);
        } catch (const Error& e) {
          errors[i] = e.what();
        }
      });
      const std::string out_path = mo.out.empty() ? mo.in + ".mined.jsonl" : mo.out;
      JsonlWriter writer(out_path, WriteMode::Truncate);
      std::size_t ok = 0, failed = 0, filled = 0;
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (!samples[i]) {
          spdlog::error("pair {}: {}", i + 1, errors[i]);
          ++failed;
          continue;
        }
        check_sample(*samples[i], cfg.k_negatives);
        writer.write(sample_to_json(*samples[i]));
        filled += samples[i]->mining.filled;
        ++ok;
      }
      summary = {{"pairs", pairs.size()}, {"mined", ok}, {"failed", failed},
                 {"filled_negatives", filled}, {"corpus_size", miner.corpus_size()},
                 {"output", out_path}};
      if (failed > 0) {
        summary["error"] = errors[std::distance(
            samples.begin(), std::find(samples.begin(), samples.end(), std::nullopt))];
        exit_code = kExitPartial;
      }
    };
  });

  // ------------------------------------------------------------------ plan
  auto* plan = app.add_subcommand("plan", "Write the three curriculum stage manifests");
  struct {
    std::string sources, out_dir;
    double lr1 = kDefaultLr1, lr3 = kDefaultLr3;
    std::size_t top_n = 3, max_len = kDefaultMaxLen;
  } po;
  plan->add_option("--sources", po.sources, "Data sources JSONL {path, kind, sample_count, weight}")
      ->required();
  plan->add_option("--out-dir", po.out_dir, "Directory for stage1/2/3.manifest.jsonl")->required();
  plan->add_option("--lr1", po.lr1, "Learning-rate hint for stages 1 and 2")->capture_default_str();
  plan->add_option("--lr3", po.lr3, "Learning-rate hint for stage 3")->capture_default_str();
  plan->add_option("--top-n", po.top_n, "Stage-3 easy-sample cutoff rank")->capture_default_str();
  plan->add_option("--max-len", po.max_len, "Maximum sequence length hint")->capture_default_str();
  plan->callback([&] {
    action = [&] {
      const auto sources = read_sources(po.sources);
      auto stages = plan_stages(sources, po.lr1, po.lr3, po.top_n);
      Json files = Json::array();
      for (auto& m : stages) {
        m.max_len = po.max_len;
        const auto path = std::filesystem::path(po.out_dir) / ("stage" + std::to_string(m.stage) + ".manifest.jsonl");
        write_manifest(m, path);
        files.push_back({{"stage", m.stage}, {"path", path.string()}, {"entries", m.entries.size()},
                         {"lr_hint", m.learning_rate_hint}});
      }
      summary = {{"manifests", files}};
    };
  });

  // ---------------------------------------------------------------- filter
  auto* filter = app.add_subcommand("filter", "Apply the stage-3 easy-sample and difficulty filters");
  struct {
    std::string in, out, filter_corpus, model = std::string(kDefaultModel);
    std::size_t top_n = 3, expected_negatives = kDefaultNegatives;
    bool skip_e5 = false, skip_difficulty = false;
    GatewayOptions gateway;
    EmbedderOptions embedder;
  } fo;
  filter->add_option("--in", fo.in, "Samples JSONL")->required();
  filter->add_option("--out", fo.out, "Retained samples JSONL")->required();
  filter->add_option("--top-n", fo.top_n, "Drop samples whose positive ranks at or above this")
      ->capture_default_str();
  filter->add_option("--filter-corpus", fo.filter_corpus,
                     "Retrieval corpus JSONL (default: all positives and negatives in --in)");
  filter->add_option("--expected-negatives", fo.expected_negatives, "Negatives per input sample")
      ->capture_default_str();
  filter->add_option("--model", fo.model, "Difficulty judge model")->capture_default_str();
  filter->add_flag("--skip-e5", fo.skip_e5, "Skip the easy-sample retrieval filter");
  filter->add_flag("--skip-difficulty", fo.skip_difficulty, "Skip the difficulty filter");
  add_gateway_flags(filter, fo.gateway);
  add_embedder_flags(filter, fo.embedder);
  filter->callback([&] {
    action = [&] {
      const Registry registry = load_registry_from(global);
      auto samples = read_samples(fo.in, fo.expected_negatives);
      summary = {{"input", samples.size()}};
      if (!fo.skip_e5) {
        auto embedder = make_embedder(fo.embedder, std::nullopt);
        E5FilterOptions opts;
        opts.top_n = fo.top_n;
        opts.jobs = global.jobs;
        if (!fo.filter_corpus.empty()) {
          IngestOptions ingest;
          ingest.min_chars = 1;
          ingest.known_languages = known_languages(registry);
          opts.corpus = corpus_texts(ingest_corpus(fo.filter_corpus, ingest));
        }
        auto r = e5_simple_filter(samples, *embedder, opts);
        summary["e5_dropped"] = r.dropped.size();
        summary["e5_missing_positive"] = r.missing_positive.size();
        if (!r.missing_positive.empty()) exit_code = kExitPartial;
        samples = std::move(r.retained);
      }
      if (!fo.skip_difficulty) {
        auto gateway = make_gateway(fo.gateway);
        DifficultyFilterOptions opts;
        opts.model = fo.model;
        opts.jobs = global.jobs;
        auto r = difficulty_filter(samples, registry, *gateway, opts);
        Json counts = Json::object();
        for (const auto& [d, n] : r.counts) counts[std::string(to_string(d))] = n;
        summary["difficulty"] = counts;
        samples = std::move(r.retained);
      }
      write_samples(samples, fo.out, WriteMode::Truncate, fo.expected_negatives);
      summary["retained"] = samples.size();
      summary["output"] = fo.out;
    };
  });

  // ----------------------------------------------------------------- dedup
  auto* dedup = app.add_subcommand("dedup", "Remove exact-duplicate queries and documents");
  struct {
    std::string benchmark, out, instruction;
  } dd;
  dedup->add_option("--benchmark", dd.benchmark, "Benchmark directory")->required();
  dedup->add_option("--out", dd.out, "Output benchmark directory")->required();
  dedup->add_option("--instruction", dd.instruction, "Override the evaluation instruction");
  dedup->callback([&] {
    action = [&] {
      auto b = load_benchmark(dd.benchmark, dd.instruction.empty() ? std::nullopt
                                                                   : std::optional(dd.instruction));
      DedupDelta delta;
      const auto d = dedup_benchmark(b, &delta);
      save_benchmark(d, dd.out);
      summary = {{"benchmark", b.name},
                 {"queries", d.queries.size()},
                 {"corpus_size", d.corpus.size()},
                 {"queries_removed", delta.queries_removed},
                 {"docs_removed", delta.docs_removed},
                 {"output", dd.out}};
    };
  });

  // ------------------------------------------------------------------ eval
  auto* eval = app.add_subcommand("eval", "Instructed retrieval and NDCG@k over benchmarks");
  struct {
    std::vector<std::string> benchmarks;
    std::string report = "report.jsonl", run_dir, instruction;
    std::size_t k = 10;
    bool dedup = false;
    EmbedderOptions embedder;
  } eo;
  eval->add_option("--benchmark", eo.benchmarks, "Benchmark directory (repeatable)")->required();
  eval->add_flag("--dedup", eo.dedup, "Deduplicate each benchmark first");
  eval->add_option("--k", eo.k, "Cutoff rank")->capture_default_str();
  eval->add_option("--report", eo.report, "Report JSONL")->capture_default_str();
  eval->add_option("--run-dir", eo.run_dir, "Write TREC runs here");
  eval->add_option("--instruction", eo.instruction, "Override the evaluation instruction");
  add_embedder_flags(eval, eo.embedder);
  eval->callback([&] {
    action = [&] {
      auto embedder = make_embedder(eo.embedder, std::nullopt);
      std::vector<EvalBenchmark> loaded;
      std::vector<BenchmarkScore> load_failures;
      for (const auto& dir : eo.benchmarks) {
        try {
          loaded.push_back(load_benchmark(dir, eo.instruction.empty() ? std::nullopt
                                                                      : std::optional(eo.instruction)));
        } catch (const Error& e) {
          spdlog::error("cannot load {}: {}", dir, e.what());
          BenchmarkScore row;
          row.name = std::filesystem::path(dir).filename().string();
          row.error = e.what();
          load_failures.push_back(row);
        }
      }
      EvalOptions opts;
      opts.dedup = eo.dedup;
      opts.k = eo.k;
      opts.jobs = global.jobs;
      if (!eo.run_dir.empty()) opts.run_dir = eo.run_dir;
      auto report = evaluate(loaded, *embedder, opts);
      for (auto& f : load_failures) report.rows.push_back(std::move(f));
      {
        JsonlWriter writer(eo.report, WriteMode::Truncate);
        for (const auto& line : report.to_json_lines()) writer.write(line);
      }
      err << report.to_table();
      std::size_t failed = 0;
      for (const auto& r : report.rows) failed += !r.error.empty();
      summary = {{"benchmarks", report.rows.size()},
                 {"failed", failed},
                 {"macro_average", report.macro_average ? Json(*report.macro_average) : Json(nullptr)},
                 {"report", eo.report}};
      if (failed > 0) exit_code = kExitPartial;
    };
  });

  // ------------------------------------------------------------ check-loss
  auto* check_loss = app.add_subcommand("check-loss", "Reference InfoNCE loss and gradients");
  struct {
    std::string in, out;
    double temperature = 0.02;
    bool fd = false;
  } co;
  check_loss->add_option("--in", co.in, "Instances JSONL {q, pos, negs, temperature?}")->required();
  check_loss->add_option("--out", co.out, "Results JSONL (default: <in>.loss.jsonl)");
  check_loss->add_option("--temperature", co.temperature, "Default temperature")->capture_default_str();
  check_loss->add_flag("--fd-check", co.fd, "Also report finite-difference relative error");
  check_loss->callback([&] {
    action = [&] {
      const std::string out_path = co.out.empty() ? co.in + ".loss.jsonl" : co.out;
      JsonlWriter writer(out_path, WriteMode::Truncate);
      std::size_t n = 0, failed = 0;
      double max_fd = 0.0;
      for_each_jsonl(co.in, [&](const Json& record, std::size_t line) {
        ++n;
        try {
          LossConfig cfg{record.value("temperature", co.temperature)};
          const auto inst = loss_instance_from_json(record);
          const auto grads = infonce_grad(inst, cfg);
          Json result = {{"line", line},
                         {"temperature", cfg.temperature},
                         {"loss", infonce_loss(inst, cfg)},
                         {"grad", gradients_to_json(grads)}};
          if (co.fd) {
            const double e = gradient_relative_error(grads, finite_difference_grad(inst, cfg));
            result["fd_relative_error"] = e;
            max_fd = std::max(max_fd, e);
          }
          writer.write(result);
        } catch (const std::exception& e) {
          spdlog::error("line {}: {}", line, e.what());
          writer.write({{"line", line}, {"error", e.what()}});
          ++failed;
        }
      });
      summary = {{"instances", n}, {"failed", failed}, {"output", out_path}};
      if (co.fd) summary["max_fd_relative_error"] = max_fd;
      if (failed > 0) exit_code = kExitPartial;
    };
  });

  // ----------------------------------------------------- validate-registry
  auto* validate = app.add_subcommand("validate-registry", "Check a task registry and report issues");
  struct {
    std::string tasks, languages;
    bool extended = false;
  } vo;
  validate->add_option("--tasks", vo.tasks, "Registry JSONL (default: bundled)");
  validate->add_option("--language-list", vo.languages, "Language list (default: beside --tasks)");
  validate->add_flag("--extended", vo.extended, "Do not enforce the 10/10/18/9 task split");
  validate->callback([&] {
    action = [&] {
      std::filesystem::path tasks = vo.tasks.empty() ? (!global.registry.empty()
                                                            ? std::filesystem::path(global.registry)
                                                            : default_data_dir() / "registry" / "tasks.jsonl")
                                                     : std::filesystem::path(vo.tasks);
      std::optional<std::filesystem::path> langs;
      if (!vo.languages.empty()) langs = vo.languages;
      else if (!global.languages.empty()) langs = global.languages;
      const auto registry = read_registry(tasks, langs);
      const auto report = validate_registry(registry, LoadOptions{!vo.extended});
      summary = report.to_json();
      summary["registry"] = tasks.string();
      for (const auto& issue : report.issues) spdlog::error("{}", issue);
      if (!report.ok()) exit_code = kExitPartial;
    };
  });

  std::string command;
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  for (auto* sub : app.get_subcommands()) command = sub->get_name();
  spdlog::set_level(spdlog::level::from_str(global.log_level));
  if (global.jobs == 0) global.jobs = 1;

  try {
    action();
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    summary = {{"error", e.what()}};
    exit_code = kExitConfig;
  } catch (const ParseError& e) {
    spdlog::error("{}", e.what());
    summary = {{"error", e.what()}};
    exit_code = kExitConfig;
  } catch (const NotFoundError& e) {
    spdlog::error("{}", e.what());
    summary = {{"error", e.what()}};
    exit_code = kExitConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    summary = {{"error", e.what()}};
    exit_code = kExitPartial;
  }
  Json record = {{"command", command},
                 {"exit_code", exit_code},
                 {"status", exit_code == kExitOk ? "ok" : exit_code == kExitPartial ? "partial" : "error"}};
  for (auto& [key, value] : summary.items()) record[key] = value;
  emit(out, record);
  return exit_code;
}

}  // namespace coder_forge
