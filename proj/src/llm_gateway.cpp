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

#include "coder_forge/llm_gateway.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace coder_forge {

void CompletionRequest::validate() const {
  if (max_output_tokens <= 0) throw ConfigError("max_output_tokens must be positive");
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be non-negative");
}

std::int64_t estimate_tokens(std::string_view text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

// ---------------------------------------------------------------------------
// MockGateway
// ---------------------------------------------------------------------------

namespace {

TemplateId parse_template_id(std::string_view name) {
  for (auto id : {TemplateId::Brainstorm, TemplateId::Generation, TemplateId::Annotation,
                  TemplateId::Difficulty}) {
    if (to_string(id) == name) return id;
  }
  throw ParseError("unknown template '" + std::string(name) + "'");
}

MockGateway::Rule rule_from_json(const Json& record) {
  if (!record.is_object()) throw ParseError("mock fixture record must be an object");
  MockGateway::Rule rule;
  if (record.contains("prompt_hash")) rule.prompt_hash = record.at("prompt_hash").get<std::string>();
  if (record.contains("contains")) {
    const auto& c = record.at("contains");
    if (c.is_string()) {
      rule.contains.push_back(c.get<std::string>());
    } else {
      rule.contains = c.get<std::vector<std::string>>();
    }
  }
  if (record.contains("template")) {
    rule.template_id = parse_template_id(record.at("template").get<std::string>());
  }
  if (record.contains("model")) rule.model = record.at("model").get<std::string>();
  if (record.contains("responses")) {
    rule.responses = record.at("responses").get<std::vector<std::string>>();
  } else if (record.contains("response")) {
    rule.responses.push_back(record.at("response").get<std::string>());
  }
  if (rule.responses.empty()) throw ParseError("mock fixture record has no response");
  return rule;
}

}  // namespace

MockGateway::MockGateway(std::vector<Rule> rules) : rules_(std::move(rules)) {}

MockGateway MockGateway::from_file(const std::filesystem::path& path) {
  return MockGateway(load_rules(path));
}

std::vector<MockGateway::Rule> MockGateway::load_rules(const std::filesystem::path& path) {
  std::vector<Rule> rules;
  for_each_jsonl(path, [&](const Json& record, std::size_t line) {
    try {
      rules.push_back(rule_from_json(record));
    } catch (const ParseError& e) {
      throw ParseError(path.filename().string() + ": " + e.what(), line);
    }
  });
  return rules;
}

const MockGateway::Rule* MockGateway::match(const CompletionRequest& request) const {
  const std::string hash = request.prompt.hash();
  for (const auto& rule : rules_) {
    if (rule.prompt_hash && *rule.prompt_hash == hash) return &rule;
  }
  for (const auto& rule : rules_) {
    if (rule.prompt_hash) continue;
    if (rule.template_id && *rule.template_id != request.prompt.template_id) continue;
    if (rule.model && *rule.model != request.model_name) continue;
    const bool all = std::all_of(rule.contains.begin(), rule.contains.end(), [&](const auto& s) {
      return request.prompt.body.find(s) != std::string::npos;
    });
    if (all) return &rule;
  }
  return nullptr;
}

Completion MockGateway::complete(const CompletionRequest& request) {
  request.validate();
  ++calls_;
  const Rule* rule = match(request);
  if (!rule) {
    throw GatewayError("mock has no response for " + std::string(to_string(request.prompt.template_id)) +
                       " prompt " + request.prompt.hash());
  }
  Completion out;
  const auto idx = static_cast<std::size_t>(std::max(request.attempt, 0)) % rule->responses.size();
  out.text = rule->responses[idx];
  out.usage.prompt_tokens = estimate_tokens(request.prompt.body);
  out.usage.completion_tokens = estimate_tokens(out.text);
  out.correlation_id = request.correlation_id;
  return out;
}

// ---------------------------------------------------------------------------
// RateLimiter
// ---------------------------------------------------------------------------

RateLimiter::RateLimiter(Options options, Clock clock)
    : options_(options), clock_(clock ? std::move(clock) : [] { return std::chrono::steady_clock::now(); }) {
  if (options_.max_concurrency == 0) throw ConfigError("max_concurrency must be at least 1");
  if (options_.tokens_per_minute < 0) throw ConfigError("tokens_per_minute must be non-negative");
}

void RateLimiter::prune(std::chrono::steady_clock::time_point now) {
  while (!window_.empty() && now - window_.front().first >= std::chrono::minutes(1)) {
    window_.pop_front();
  }
}

std::int64_t RateLimiter::window_tokens() const {
  std::int64_t total = 0;
  for (const auto& [_, t] : window_) total += t;
  return total;
}

void RateLimiter::acquire(std::int64_t tokens) {
  std::unique_lock lock(mu_);
  for (;;) {
    const auto now = clock_();
    prune(now);
    const bool slot = in_flight_ < options_.max_concurrency;
    // An oversized request is admitted once the window is empty.
    const bool budget = options_.tokens_per_minute == 0 || window_.empty() ||
                        window_tokens() + tokens <= options_.tokens_per_minute;
    if (slot && budget) {
      ++in_flight_;
      if (options_.tokens_per_minute > 0) window_.emplace_back(now, tokens);
      return;
    }
    if (!slot || window_.empty()) {
      cv_.wait(lock);
    } else {
      const auto until_expiry = window_.front().first + std::chrono::minutes(1) - now;
      cv_.wait_for(lock, std::min<std::chrono::steady_clock::duration>(until_expiry,
                                                                       std::chrono::milliseconds(200)));
    }
  }
}

void RateLimiter::release() {
  {
    std::lock_guard lock(mu_);
    if (in_flight_ > 0) --in_flight_;
  }
  cv_.notify_all();
}

void RateLimiter::charge(std::int64_t tokens) {
  if (tokens <= 0 || options_.tokens_per_minute == 0) return;
  std::lock_guard lock(mu_);
  window_.emplace_back(clock_(), tokens);
}

std::size_t RateLimiter::in_flight() const {
  std::lock_guard lock(mu_);
  return in_flight_;
}

// ---------------------------------------------------------------------------
// Parsers
// ---------------------------------------------------------------------------

std::string_view to_string(AnnotationLabel label) {
  switch (label) {
    case AnnotationLabel::Accept: return "accept";
    case AnnotationLabel::Reject: return "reject";
    case AnnotationLabel::Malformed: return "malformed";
  }
  return "?";
}

AnnotationLabel parse_annotation_label_name(std::string_view name) {
  for (auto l : {AnnotationLabel::Accept, AnnotationLabel::Reject, AnnotationLabel::Malformed}) {
    if (to_string(l) == name) return l;
  }
  throw ParseError("unknown annotation label '" + std::string(name) + "'");
}

AnnotationLabel parse_annotation(std::string_view response) {
  const auto t = trim(response);
  if (t == "1") return AnnotationLabel::Accept;
  if (t == "0" || t == "2") return AnnotationLabel::Reject;
  return AnnotationLabel::Malformed;
}

std::string_view to_string(Difficulty difficulty) {
  switch (difficulty) {
    case Difficulty::ErrorData: return "error_data";
    case Difficulty::Simple: return "simple";
    case Difficulty::Medium: return "medium";
    case Difficulty::Hard: return "hard";
    case Difficulty::Malformed: return "malformed";
  }
  return "?";
}

Difficulty parse_difficulty_name(std::string_view name) {
  for (auto d : {Difficulty::ErrorData, Difficulty::Simple, Difficulty::Medium, Difficulty::Hard,
                 Difficulty::Malformed}) {
    if (to_string(d) == name) return d;
  }
  throw ParseError("unknown difficulty '" + std::string(name) + "'");
}

Difficulty parse_difficulty(std::string_view response) {
  std::string_view line;
  std::size_t pos = 0;
  while (pos <= response.size()) {
    const std::size_t nl = response.find('\n', pos);
    const auto candidate = trim(response.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    if (!candidate.empty()) {
      line = candidate;
      break;
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  // Models sometimes echo the option with its quotes.
  while (!line.empty() && (line.front() == '"' || line.front() == '`')) line.remove_prefix(1);
  const std::string lower = to_lower(line);
  static constexpr std::array<std::pair<std::string_view, Difficulty>, 4> kOptions = {{
      {"yes, simple", Difficulty::Simple},
      {"yes, medium", Difficulty::Medium},
      {"yes, hard", Difficulty::Hard},
      {"no", Difficulty::ErrorData},
  }};
  for (const auto& [prefix, value] : kOptions) {
    if (lower.compare(0, prefix.size(), prefix) != 0) continue;
    if (lower.size() == prefix.size() || !std::isalpha(static_cast<unsigned char>(lower[prefix.size()]))) {
      return value;
    }
  }
  return Difficulty::Malformed;
}

std::vector<SeedTask> parse_brainstorm(std::string_view response) {
  const auto t = trim(response);
  if (t.empty() || t.front() != '[' || t.back() != ']') {
    throw ParseError("brainstorm response must start with \"[\" and end with \"]\"");
  }
  Json parsed;
  try {
    parsed = Json::parse(t);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("brainstorm response is not valid JSON: ") + e.what());
  }
  if (!parsed.is_array()) throw ParseError("brainstorm response is not an array");
  if (parsed.empty()) throw ParseError("empty brainstorm");
  std::vector<SeedTask> out;
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    const auto& item = parsed[i];
    const auto name = item.is_object() ? item.find("task_name") : item.end();
    const auto instr = item.is_object() ? item.find("task_instruction") : item.end();
    if (!item.is_object() || name == item.end() || instr == item.end() || !name->is_string() ||
        !instr->is_string()) {
      throw ParseError("brainstorm element " + std::to_string(i) +
                       " needs string fields task_name and task_instruction");
    }
    out.push_back({name->get<std::string>(), instr->get<std::string>()});
  }
  return out;
}

}  // namespace coder_forge
