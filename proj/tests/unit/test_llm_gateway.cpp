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
#include <httplib.h>

#include <atomic>
#include <future>
#include <random>

#include "coder_forge/llm_gateway.hpp"
#include "test_support.hpp"

namespace coder_forge {
namespace {

using namespace std::chrono_literals;
using testing::TempDir;

// --------------------------------------------------------------- parsers

TEST(ParseAnnotation, ExactRule) {
  EXPECT_EQ(parse_annotation("1"), AnnotationLabel::Accept);
  EXPECT_EQ(parse_annotation(" 1\n"), AnnotationLabel::Accept);
  EXPECT_EQ(parse_annotation("0"), AnnotationLabel::Reject);
  EXPECT_EQ(parse_annotation("2"), AnnotationLabel::Reject);
  EXPECT_EQ(parse_annotation("Yes, it matches"), AnnotationLabel::Malformed);
  EXPECT_EQ(parse_annotation("1."), AnnotationLabel::Malformed);
  EXPECT_EQ(parse_annotation("11"), AnnotationLabel::Malformed);
  EXPECT_EQ(parse_annotation(""), AnnotationLabel::Malformed);
}

TEST(ParseAnnotation, TrimInvariantAndOnlyOneAccepts) {
  std::mt19937_64 rng(5);
  const std::string alphabet = " \t\n012Yesno.";
  for (int i = 0; i < 5000; ++i) {
    std::string s;
    for (std::size_t n = rng() % 6; n > 0; --n) s += alphabet[rng() % alphabet.size()];
    const auto label = parse_annotation(s);
    EXPECT_EQ(label, parse_annotation(trim(s)));
    if (trim(s) != "1") EXPECT_NE(label, AnnotationLabel::Accept) << s;
    EXPECT_EQ(label_value(label), trim(s) == "1" ? 1 : 0);
  }
}

TEST(ParseDifficulty, Options) {
  EXPECT_EQ(parse_difficulty("Yes, medium - the reasoning requires moderate effort"), Difficulty::Medium);
  EXPECT_EQ(parse_difficulty("No"), Difficulty::ErrorData);
  EXPECT_EQ(parse_difficulty("maybe"), Difficulty::Malformed);
  EXPECT_EQ(parse_difficulty("YES, HARD\nbecause"), Difficulty::Hard);
  EXPECT_EQ(parse_difficulty("\n\n\"Yes, simple\" - direct"), Difficulty::Simple);
  EXPECT_EQ(parse_difficulty("Nope"), Difficulty::Malformed);
  EXPECT_EQ(parse_difficulty("Yes, mediumish"), Difficulty::Malformed);
  EXPECT_EQ(parse_difficulty(""), Difficulty::Malformed);
}

TEST(ParseDifficulty, OnlyMediumAndHardRetainable) {
  EXPECT_TRUE(is_retainable(Difficulty::Medium));
  EXPECT_TRUE(is_retainable(Difficulty::Hard));
  EXPECT_FALSE(is_retainable(Difficulty::Simple));
  EXPECT_FALSE(is_retainable(Difficulty::ErrorData));
  EXPECT_FALSE(is_retainable(Difficulty::Malformed));
}

TEST(ParseBrainstorm, Valid) {
  const auto tasks = parse_brainstorm(R"([{"task_name":"A","task_instruction":"B"}])");
  ASSERT_EQ(tasks.size(), 1u);
  EXPECT_EQ(tasks[0], (SeedTask{"A", "B"}));
}

TEST(ParseBrainstorm, Errors) {
  EXPECT_THROW(parse_brainstorm(R"(Sure! [{"task_name":"A","task_instruction":"B"}])"), ParseError);
  try {
    parse_brainstorm("[]");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("empty brainstorm"), std::string::npos);
  }
  EXPECT_THROW(parse_brainstorm(R"([{"task_name":"A"}])"), ParseError);
  EXPECT_THROW(parse_brainstorm("[not json]"), ParseError);
  EXPECT_THROW(parse_brainstorm(R"({"task_name":"A","task_instruction":"B"})"), ParseError);
}

TEST(CompletionRequest, Validation) {
  CompletionRequest r;
  r.max_output_tokens = 0;
  EXPECT_THROW(r.validate(), ConfigError);
  r.max_output_tokens = 10;
  r.temperature = -1;
  EXPECT_THROW(r.validate(), ConfigError);
}

// ------------------------------------------------------------------ mock

CompletionRequest request(std::string body, TemplateId id = TemplateId::Annotation, int attempt = 0) {
  CompletionRequest r;
  r.prompt.body = std::move(body);
  r.prompt.template_id = id;
  r.attempt = attempt;
  return r;
}

TEST(MockGateway, HashMatchWinsOverEarlierContainsRule) {
  MockGateway::Rule contains;
  contains.contains = {"hello"};
  contains.responses = {"by contains"};
  MockGateway::Rule by_hash;
  by_hash.prompt_hash = sha256_hex("hello world");
  by_hash.responses = {"by hash"};
  MockGateway g({contains, by_hash});
  EXPECT_EQ(g.complete(request("hello world")).text, "by hash");
  EXPECT_EQ(g.complete(request("hello there")).text, "by contains");
  EXPECT_EQ(g.calls(), 2u);
}

TEST(MockGateway, TemplateConstraintAndMiss) {
  MockGateway::Rule r;
  r.template_id = TemplateId::Generation;
  r.responses = {"gen"};
  MockGateway g({r});
  EXPECT_EQ(g.complete(request("x", TemplateId::Generation)).text, "gen");
  EXPECT_THROW(g.complete(request("x", TemplateId::Annotation)), GatewayError);
}

TEST(MockGateway, ResponsesIndexedByAttempt) {
  MockGateway::Rule r;
  r.responses = {"garbage", "1"};
  MockGateway g({r});
  EXPECT_EQ(g.complete(request("x", TemplateId::Annotation, 0)).text, "garbage");
  EXPECT_EQ(g.complete(request("x", TemplateId::Annotation, 1)).text, "1");
  EXPECT_EQ(g.complete(request("x", TemplateId::Annotation, 2)).text, "garbage");
}

TEST(MockGateway, FromFileAndDeterministicSequence) {
  TempDir dir;
  testing::write_jsonl(dir / "mock.jsonl",
                       {Json{{"template", "annotation"}, {"contains", "alpha"}, {"response", "1"}},
                        Json{{"contains", Json::array({"beta", "gamma"})}, {"response", "0"}},
                        Json{{"response", "fallback"}}});
  auto run = [&] {
    auto g = MockGateway::from_file(dir / "mock.jsonl");
    std::vector<std::string> out;
    for (auto body : {"alpha", "beta gamma", "beta", "alpha"}) out.push_back(g.complete(request(body)).text);
    return out;
  };
  EXPECT_EQ(run(), (std::vector<std::string>{"1", "0", "fallback", "1"}));
  EXPECT_EQ(run(), run());
}

TEST(MockGateway, BadFixtureIsParseError) {
  TempDir dir;
  testing::write_jsonl(dir / "mock.jsonl", {Json{{"contains", "x"}}});
  EXPECT_THROW(MockGateway::load_rules(dir / "mock.jsonl"), ParseError);
}

// ---------------------------------------------------------- rate limiter

TEST(RateLimiter, BoundsConcurrency) {
  RateLimiter limiter({2, 0});
  std::atomic<int> active{0};
  std::atomic<int> peak{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] {
      limiter.acquire(1);
      const int now = ++active;
      int p = peak.load();
      while (now > p && !peak.compare_exchange_weak(p, now)) {}
      std::this_thread::sleep_for(5ms);
      --active;
      limiter.release();
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_LE(peak.load(), 2);
  EXPECT_EQ(limiter.in_flight(), 0u);
}

TEST(RateLimiter, TokenBudgetWaitsForWindowToSlide) {
  std::atomic<std::int64_t> fake_ms{0};
  auto clock = [&] { return std::chrono::steady_clock::time_point(std::chrono::milliseconds(fake_ms.load())); };
  RateLimiter limiter({4, 100}, clock);
  limiter.acquire(60);
  limiter.release();
  auto second = std::async(std::launch::async, [&] {
    limiter.acquire(60);
    limiter.release();
  });
  EXPECT_EQ(second.wait_for(300ms), std::future_status::timeout);
  fake_ms = 61'000;
  EXPECT_EQ(second.wait_for(2s), std::future_status::ready);
}

TEST(RateLimiter, RejectsZeroConcurrency) {
  EXPECT_THROW(RateLimiter({0, 0}), ConfigError);
}

// ------------------------------------------------------------------ http

class ScriptedServer {
 public:
  explicit ScriptedServer(std::function<int(int)> status_for_call) : status_for_call_(std::move(status_for_call)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int call = ++calls_;
      last_body_ = req.body;
      res.status = status_for_call_(call);
      if (res.status == 200) {
        const Json body = {{"choices", Json::array({{{"message", {{"role", "assistant"}, {"content", "1"}}}}})},
                           {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 1}}}};
        res.set_content(body.dump(), "application/json");
      } else {
        res.set_content("{\"error\":\"busy\"}", "application/json");
      }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~ScriptedServer() {
    server_.stop();
    thread_.join();
  }
  std::string base() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  int calls() const { return calls_.load(); }
  Json last_body() const { return Json::parse(last_body_); }

 private:
  std::function<int(int)> status_for_call_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> calls_{0};
  std::string last_body_;
};

HttpGatewayOptions options_for(const ScriptedServer& s, std::vector<std::chrono::milliseconds>* sleeps) {
  HttpGatewayOptions o;
  o.base_url = s.base();
  o.api_key = "test-key";
  o.max_retries = 3;
  o.base_backoff = 10ms;
  o.timeout = 5s;
  o.sleeper = [sleeps](std::chrono::milliseconds d) { sleeps->push_back(d); };
  return o;
}

TEST(HttpChatGateway, RetriesTwo429sThenSucceeds) {
  ScriptedServer server([](int call) { return call <= 2 ? 429 : 200; });
  std::vector<std::chrono::milliseconds> sleeps;
  HttpChatGateway g(options_for(server, &sleeps));
  auto req = request("prompt body");
  req.temperature = 0.0;
  req.seed = 42;
  const auto c = g.complete(req);
  EXPECT_EQ(c.text, "1");
  EXPECT_EQ(c.attempts, 3);
  EXPECT_EQ(c.usage.prompt_tokens, 12);
  EXPECT_EQ(server.calls(), 3);
  EXPECT_EQ(sleeps, (std::vector<std::chrono::milliseconds>{10ms, 20ms}));
  const auto body = server.last_body();
  EXPECT_EQ(body["messages"][0]["content"], "prompt body");
  EXPECT_EQ(body["seed"], 42);
}

TEST(HttpChatGateway, AllAttemptsDownExhaustsRetries) {
  ScriptedServer server([](int) { return 503; });
  std::vector<std::chrono::milliseconds> sleeps;
  HttpChatGateway g(options_for(server, &sleeps));
  try {
    g.complete(request("x"));
    FAIL() << "expected GatewayError";
  } catch (const GatewayError& e) {
    EXPECT_NE(std::string(e.what()).find("retries exhausted"), std::string::npos);
  }
  EXPECT_EQ(server.calls(), 4);
}

TEST(HttpChatGateway, ClientErrorIsNotRetried) {
  ScriptedServer server([](int) { return 400; });
  std::vector<std::chrono::milliseconds> sleeps;
  HttpChatGateway g(options_for(server, &sleeps));
  EXPECT_THROW(g.complete(request("x")), GatewayError);
  EXPECT_EQ(server.calls(), 1);
}

TEST(HttpChatGateway, UnreachableEndpointExhaustsRetries) {
  HttpGatewayOptions o;
  o.base_url = "http://127.0.0.1:1";
  o.max_retries = 1;
  o.base_backoff = 1ms;
  o.timeout = 1s;
  o.sleeper = [](std::chrono::milliseconds) {};
  HttpChatGateway g(o);
  try {
    g.complete(request("x"));
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_NE(std::string(e.what()).find("retries exhausted"), std::string::npos);
  }
}

TEST(HttpGatewayOptions, FromEnvRequiresBase) {
  ::unsetenv("CODER_FORGE_API_BASE");
  EXPECT_THROW(HttpGatewayOptions::from_env(), ConfigError);
  ::setenv("CODER_FORGE_API_BASE", "http://localhost:9", 1);
  EXPECT_EQ(HttpGatewayOptions::from_env().base_url, "http://localhost:9");
  ::unsetenv("CODER_FORGE_API_BASE");
}

}  // namespace
}  // namespace coder_forge
