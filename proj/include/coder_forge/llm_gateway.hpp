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

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coder_forge/common.hpp"
#include "coder_forge/prompt_engine.hpp"

namespace coder_forge {

inline constexpr std::string_view kDefaultModel = "Qwen2.5-Coder-32B-Instruct";
inline constexpr double kDefaultGenerationTemperature = 0.7;
inline constexpr double kDefaultJudgeTemperature = 0.0;

struct CompletionRequest {
  PromptText prompt;
  std::string model_name = std::string(kDefaultModel);
  double temperature = kDefaultJudgeTemperature;
  int max_output_tokens = 2048;
  std::optional<std::uint64_t> seed;
  /// 0 for the first ask of a prompt, 1 for a re-ask.
  int attempt = 0;
  std::string correlation_id;

  /// Throws ConfigError when max_output_tokens <= 0 or temperature < 0.
  void validate() const;
};

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  std::int64_t total() const noexcept { return prompt_tokens + completion_tokens; }
};

struct Completion {
  std::string text;
  Usage usage;
  /// Transport attempts, 1 when the first request succeeded.
  int attempts = 1;
  std::string correlation_id;
};

/// Chat-completion backend. Implementations are shareable across threads.
class Gateway {
 public:
  virtual ~Gateway() = default;
  virtual Completion complete(const CompletionRequest& request) = 0;
};

/// File-backed deterministic gateway. Each fixture record may carry any of
/// `prompt_hash`, `contains` (string or list), `template`, `model`, and
/// either `response` or `responses`. A request is answered by the first
/// record matching on hash, else the first matching on the remaining
/// constraints in file order. With `responses`, the entry at
/// `attempt % size` is returned, so answers never depend on thread timing.
class MockGateway final : public Gateway {
 public:
  struct Rule {
    std::optional<std::string> prompt_hash;
    std::vector<std::string> contains;
    std::optional<TemplateId> template_id;
    std::optional<std::string> model;
    std::vector<std::string> responses;
  };

  explicit MockGateway(std::vector<Rule> rules);
  static MockGateway from_file(const std::filesystem::path& path);
  static std::vector<Rule> load_rules(const std::filesystem::path& path);

  Completion complete(const CompletionRequest& request) override;

  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  const Rule* match(const CompletionRequest& request) const;

  std::vector<Rule> rules_;
  std::atomic<std::size_t> calls_{0};
};

/// Concurrency limit plus a sliding one-minute token budget.
class RateLimiter {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;

  struct Options {
    std::size_t max_concurrency = 8;
    /// 0 disables the budget.
    std::int64_t tokens_per_minute = 0;
  };

  explicit RateLimiter(Options options, Clock clock = nullptr);

  /// Blocks until a slot is free and `tokens` fit the budget.
  void acquire(std::int64_t tokens);
  void release();
  /// Charges tokens actually consumed beyond the estimate passed to acquire.
  void charge(std::int64_t tokens);

  std::size_t in_flight() const;

 private:
  void prune(std::chrono::steady_clock::time_point now);
  std::int64_t window_tokens() const;

  Options options_;
  Clock clock_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::size_t in_flight_ = 0;
  std::deque<std::pair<std::chrono::steady_clock::time_point, std::int64_t>> window_;
};

struct HttpGatewayOptions {
  std::string base_url;
  std::string api_key;
  int max_retries = 3;
  std::chrono::milliseconds base_backoff{500};
  std::chrono::seconds timeout{120};
  RateLimiter::Options limits;
  /// Injectable for tests; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleeper;

  /// Reads CODER_FORGE_API_BASE / CODER_FORGE_API_KEY. Throws ConfigError
  /// when the base URL is unset.
  static HttpGatewayOptions from_env();
};

/// OpenAI-compatible POST {base}/chat/completions. 429, 5xx and transport
/// failures are retried with exponential backoff; other 4xx are final.
class HttpChatGateway final : public Gateway {
 public:
  explicit HttpChatGateway(HttpGatewayOptions options);
  ~HttpChatGateway() override;

  Completion complete(const CompletionRequest& request) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// ---------------------------------------------------------------------------
// Response parsing
// ---------------------------------------------------------------------------

enum class AnnotationLabel { Accept, Reject, Malformed };

std::string_view to_string(AnnotationLabel label);
AnnotationLabel parse_annotation_label_name(std::string_view name);

/// Trimmed "1" is Accept, "0" or "2" is Reject, anything else Malformed.
AnnotationLabel parse_annotation(std::string_view response);

/// Only Accept counts as a positive label.
inline int label_value(AnnotationLabel label) { return label == AnnotationLabel::Accept ? 1 : 0; }

enum class Difficulty { ErrorData, Simple, Medium, Hard, Malformed };

std::string_view to_string(Difficulty difficulty);
Difficulty parse_difficulty_name(std::string_view name);

/// Case-insensitive prefix match on the first non-blank line.
Difficulty parse_difficulty(std::string_view response);

inline bool is_retainable(Difficulty d) { return d == Difficulty::Medium || d == Difficulty::Hard; }

/// Array of {"task_name", "task_instruction"} objects; the trimmed response
/// must start with '[' and end with ']'. Throws ParseError.
std::vector<SeedTask> parse_brainstorm(std::string_view response);

/// Rough token estimate used for budgeting and mock usage (4 bytes/token).
std::int64_t estimate_tokens(std::string_view text);

}  // namespace coder_forge
