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

#include <gtest/gtest.h>

#include <sstream>

#include "coder_forge/cli.hpp"
#include "coder_forge/curriculum.hpp"
#include "test_support.hpp"

namespace coder_forge {
namespace {

using testing::fixture_dir;

struct CliResult {
  int code = -1;
  Json summary;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  CliResult r;
  args.insert(args.begin(), {"--log-level", "warn"});
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  if (!r.out.empty() && r.out.front() == '{') r.summary = Json::parse(r.out.substr(0, r.out.find('\n')));
  return r;
}

std::string fx(const std::string& name) { return (fixture_dir() / name).string(); }

TEST(Cli, SynthMockRunProducesFiveAcceptedSamples) {
  testing::TempDir dir;
  const auto out = (dir / "s.jsonl").string();
  const auto r = cli({"--seed", "7", "synth", "--task", "Code Summary Retrieval", "--nl", "English", "--pl",
                      "Python", "--count", "5", "--mock", fx("mock_code_summary.jsonl"), "--corpus",
                      fx("corpus_python.jsonl"), "--out", out});
  ASSERT_EQ(r.code, kExitOk) << r.err << r.out;
  EXPECT_EQ(r.summary.at("command"), "synth");
  EXPECT_EQ(r.summary.at("status"), "ok");
  EXPECT_EQ(r.summary.at("accepted"), 5);
  const auto samples = read_samples(out);
  EXPECT_EQ(samples.size(), 5u);
  EXPECT_EQ(r.summary.at("ingest").at("accepted"), 31);

  // Same argv, same bytes.
  const auto first = testing::read_file(out);
  ASSERT_EQ(cli({"--seed", "7", "--jobs", "3", "synth", "--task", "Code Summary Retrieval", "--pl", "Python",
                 "--count", "5", "--mock", fx("mock_code_summary.jsonl"), "--corpus", fx("corpus_python.jsonl"),
                 "--out", out})
                .code,
            kExitOk);
  EXPECT_EQ(testing::read_file(out), first);
}

TEST(Cli, SynthWithoutNegativesWritesPairs) {
  testing::TempDir dir;
  const auto out = (dir / "p.jsonl").string();
  const auto r = cli({"synth", "--task", "Code Summary Retrieval", "--pl", "python", "--count", "2",
                      "--no-negatives", "--mock", fx("mock_code_summary.jsonl"), "--corpus",
                      fx("corpus_python.jsonl"), "--out", out});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(read_pairs(out).size(), 2u);
}

TEST(Cli, SynthConfigErrorsExitTwo) {
  testing::TempDir dir;
  const auto out = (dir / "s.jsonl").string();
  EXPECT_EQ(cli({"synth", "--task", "Nope", "--pl", "Python", "--mock", fx("mock_code_summary.jsonl"),
                 "--corpus", fx("corpus_python.jsonl"), "--out", out})
                .code,
            kExitConfig);
  EXPECT_EQ(cli({"synth", "--task", "Code Summary Retrieval", "--pl", "Cobol", "--mock",
                 fx("mock_code_summary.jsonl"), "--corpus", fx("corpus_python.jsonl"), "--out", out})
                .code,
            kExitConfig);
  EXPECT_EQ(cli({"synth", "--task", "Code Summary Retrieval", "--pl", "Python", "--mock",
                 fx("mock_code_summary.jsonl"), "--corpus", (dir / "missing.jsonl").string(), "--out", out})
                .code,
            kExitConfig);
}

TEST(Cli, MineOnTenDocCorpusReportsInsufficientPool) {
  testing::TempDir dir;
  const std::vector<QueryPositivePair> pairs = {testing::make_sample(1).pair};
  write_pairs(pairs, dir / "pairs.jsonl");
  const auto r = cli({"mine", "--in", (dir / "pairs.jsonl").string(), "--corpus", fx("corpus_small.jsonl"),
                      "--k", "15", "--margin", "0.95", "--mock-embedder", "seed:3"});
  EXPECT_EQ(r.code, kExitPartial);
  EXPECT_EQ(r.summary.at("status"), "partial");
  EXPECT_NE(r.summary.at("error").get<std::string>().find("insufficient negative pool"), std::string::npos);
}

TEST(Cli, MineOnLargerCorpusSucceeds) {
  testing::TempDir dir;
  const std::vector<QueryPositivePair> pairs = {testing::make_sample(1).pair, testing::make_sample(2).pair};
  write_pairs(pairs, dir / "pairs.jsonl");
  const auto r = cli({"mine", "--in", (dir / "pairs.jsonl").string(), "--corpus", fx("corpus_python.jsonl"),
                      "--mock-embedder", "seed:3", "--k", "5"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(read_samples(dir / "pairs.jsonl.mined.jsonl", 5).size(), 2u);
}

TEST(Cli, EvalWritesReportWithNdcgColumn) {
  testing::TempDir dir;
  const auto report = (dir / "report.jsonl").string();
  const auto r = cli({"eval", "--benchmark", fx("toy"), "--dedup", "--k", "10", "--mock-embedder", "seed:3",
                      "--report", report, "--run-dir", dir.path().string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::vector<Json> lines;
  for_each_jsonl(report, [&](const Json& j, std::size_t) { lines.push_back(j); });
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0].at("benchmark"), "toy");
  EXPECT_TRUE(lines[0].at("ndcg@10").is_number());
  EXPECT_EQ(lines[0].at("queries_removed"), 1);
  EXPECT_EQ(lines[0].at("docs_removed"), 1);
  EXPECT_EQ(lines[1].at("benchmark"), "macro_average");
  EXPECT_NE(r.err.find("NDCG@10"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "toy.trec"));
}

TEST(Cli, DedupWritesCleanBenchmark) {
  testing::TempDir dir;
  const auto r = cli({"dedup", "--benchmark", fx("toy"), "--out", (dir / "toy").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto b = load_benchmark(dir / "toy");
  EXPECT_EQ(b.queries.size(), 3u);
  EXPECT_EQ(b.corpus.size(), 5u);
  EXPECT_EQ(b.qrels.at("q1").at("d1"), 2);
}

TEST(Cli, PlanWritesThreeManifests) {
  testing::TempDir dir;
  const auto r = cli({"plan", "--sources", fx("sources.jsonl"), "--out-dir", dir.path().string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (int s = 1; s <= 3; ++s) {
    const auto m = read_manifest(dir / ("stage" + std::to_string(s) + ".manifest.jsonl"));
    EXPECT_EQ(m.stage, s);
  }
  EXPECT_EQ(testing::read_file(dir / "stage3.manifest.jsonl"), testing::read_file(fixture_dir() / "stage3.manifest.jsonl"));
  EXPECT_EQ(cli({"plan", "--sources", fx("sources.jsonl"), "--out-dir", dir.path().string(), "--lr1", "0"}).code,
            kExitConfig);
}

TEST(Cli, CheckLossMatchesFixture) {
  testing::TempDir dir;
  const auto out = (dir / "loss.jsonl").string();
  const auto r = cli({"check-loss", "--in", fx("check_loss.jsonl"), "--out", out, "--fd-check"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::vector<Json> got, want;
  for_each_jsonl(out, [&](const Json& j, std::size_t) { got.push_back(j); });
  for_each_jsonl(fx("check_loss.expected.jsonl"), [&](const Json& j, std::size_t) { want.push_back(j); });
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_EQ(got[i].at("line"), want[i].at("line"));
    EXPECT_NEAR(got[i].at("loss").get<double>(), want[i].at("loss").get<double>(), 1e-12);
    EXPECT_LT(got[i].at("fd_relative_error").get<double>(), 1e-4);
  }
}

TEST(Cli, FilterWithFixtureEmbedderAndSkippedDifficulty) {
  testing::TempDir dir;
  const auto r = cli({"filter", "--in", fx("triplets.jsonl"), "--out", (dir / "f.jsonl").string(),
                      "--skip-difficulty", "--mock-embedder", "seed:1"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.summary.at("retained").get<std::size_t>() + r.summary.at("e5_dropped").get<std::size_t>(), 3u);
}

TEST(Cli, ValidateRegistryBundledIsClean) {
  const auto r = cli({"validate-registry"});
  EXPECT_EQ(r.code, kExitOk) << r.out;
}

TEST(Cli, UsageErrorsAndHelp) {
  EXPECT_EQ(cli({"synth", "--bogus-flag"}).code, kExitConfig);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitConfig);
  EXPECT_EQ(cli({}).code, kExitConfig);
  const auto help = cli({"synth", "--help"});
  EXPECT_EQ(help.code, kExitOk);
  for (const char* flag : {"--task", "--count", "--mock", "--margin", "--resume", "--neg-corpus"}) {
    EXPECT_NE(help.out.find(flag), std::string::npos) << flag;
  }
}

}  // namespace
}  // namespace coder_forge
