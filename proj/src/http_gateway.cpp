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

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "coder_forge/embedder.hpp"
#include "coder_forge/llm_gateway.hpp"

namespace coder_forge {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};

Endpoint split_base_url(std::string_view base) {
  const auto scheme_end = base.find("://");
  if (scheme_end == std::string_view::npos) {
    throw ConfigError("API base URL must include a scheme: " + std::string(base));
  }
  const auto path_start = base.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = std::string(base.substr(0, path_start));
  if (path_start != std::string_view::npos) ep.prefix = std::string(base.substr(path_start));
  while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
  return ep;
}

bool is_retryable_status(int status) { return status == 429 || status >= 500; }

struct PostResult {
  Json body;
  int attempts = 0;
};

/// POSTs `payload` with retries. Sleeps base * 2^i between attempts.
PostResult post_json(httplib::Client& client, const std::string& path, const Json& payload,
                     const std::string& api_key, int max_retries,
                     std::chrono::milliseconds base_backoff,
                     const std::function<void(std::chrono::milliseconds)>& sleeper) {
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
  const std::string body = payload.dump();
  std::string last_error;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    if (attempt > 0) sleeper(base_backoff * (1LL << (attempt - 1)));
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      spdlog::warn("POST {} failed ({}), attempt {}", path, last_error, attempt + 1);
      continue;
    }
    if (res->status == 200) {
      try {
        return {Json::parse(res->body), attempt + 1};
      } catch (const nlohmann::json::parse_error& e) {
        throw GatewayError(std::string("non-retryable protocol error: invalid JSON body: ") + e.what());
      }
    }
    if (!is_retryable_status(res->status)) {
      throw GatewayError("request rejected by endpoint: HTTP " + std::to_string(res->status) + " " +
                         res->body.substr(0, 200));
    }
    last_error = "HTTP " + std::to_string(res->status);
    spdlog::warn("POST {} returned {}, attempt {}", path, res->status, attempt + 1);
  }
  throw GatewayError("retries exhausted after " + std::to_string(max_retries + 1) +
                     " attempts (" + last_error + ")");
}

}  // namespace

HttpGatewayOptions HttpGatewayOptions::from_env() {
  HttpGatewayOptions options;
  const char* base = std::getenv("CODER_FORGE_API_BASE");
  if (!base || !*base) throw ConfigError("CODER_FORGE_API_BASE is not set and no mock was given");
  options.base_url = base;
  if (const char* key = std::getenv("CODER_FORGE_API_KEY")) options.api_key = key;
  return options;
}

struct HttpChatGateway::Impl {
  HttpGatewayOptions options;
  Endpoint endpoint;
  RateLimiter limiter;

  explicit Impl(HttpGatewayOptions o)
      : options(std::move(o)), endpoint(split_base_url(options.base_url)), limiter(options.limits) {
    if (!options.sleeper) {
      options.sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
    if (options.max_retries < 0) throw ConfigError("max_retries must be non-negative");
  }
};

HttpChatGateway::HttpChatGateway(HttpGatewayOptions options)
    : impl_(std::make_unique<Impl>(std::move(options))) {}

HttpChatGateway::~HttpChatGateway() = default;

Completion HttpChatGateway::complete(const CompletionRequest& request) {
  request.validate();
  Json payload = {{"model", request.model_name},
                  {"messages", Json::array({{{"role", "user"}, {"content", request.prompt.body}}})},
                  {"temperature", request.temperature},
                  {"max_tokens", request.max_output_tokens}};
  if (request.seed) payload["seed"] = *request.seed;

  const std::int64_t estimate = estimate_tokens(request.prompt.body) + request.max_output_tokens;
  impl_->limiter.acquire(estimate);
  struct Release {
    RateLimiter& l;
    ~Release() { l.release(); }
  } release{impl_->limiter};

  // httplib clients are not thread-safe; one per call.
  httplib::Client client(impl_->endpoint.origin);
  client.set_connection_timeout(impl_->options.timeout);
  client.set_read_timeout(impl_->options.timeout);
  const auto result = post_json(client, impl_->endpoint.prefix + "/chat/completions", payload,
                                impl_->options.api_key, impl_->options.max_retries,
                                impl_->options.base_backoff, impl_->options.sleeper);
  const Json& body = result.body;
  Completion out;
  out.attempts = result.attempts;
  out.correlation_id = request.correlation_id;
  try {
    out.text = body.at("choices").at(0).at("message").at("content").get<std::string>();
    if (body.contains("usage")) {
      const auto& u = body.at("usage");
      out.usage.prompt_tokens = u.value("prompt_tokens", std::int64_t{0});
      out.usage.completion_tokens = u.value("completion_tokens", std::int64_t{0});
    }
  } catch (const nlohmann::json::exception& e) {
    throw GatewayError(std::string("non-retryable protocol error: unexpected response shape: ") + e.what());
  }
  if (out.usage.total() > estimate) impl_->limiter.charge(out.usage.total() - estimate);
  spdlog::debug("completion {} used {} tokens in {} attempt(s)", out.correlation_id,
                out.usage.total(), out.attempts);
  return out;
}

// ---------------------------------------------------------------------------
// HttpEmbedder
// ---------------------------------------------------------------------------

HttpEmbedder::HttpEmbedder(std::string base_url, std::string api_key, std::string model,
                           std::size_t batch_size)
    : base_url_(std::move(base_url)),
      api_key_(std::move(api_key)),
      model_(std::move(model)),
      batch_size_(batch_size == 0 ? 1 : batch_size) {
  split_base_url(base_url_);
}

std::vector<EmbeddingVector> HttpEmbedder::embed(std::span<const std::string> texts) {
  const Endpoint ep = split_base_url(base_url_);
  httplib::Client client(ep.origin);
  client.set_read_timeout(std::chrono::seconds(120));
  auto sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += batch_size_) {
    const auto batch = texts.subspan(start, std::min(batch_size_, texts.size() - start));
    Json payload = {{"model", model_}, {"input", Json::array()}};
    for (const auto& t : batch) payload["input"].push_back(t);
    Json body;
    try {
      body = post_json(client, ep.prefix + "/embeddings", payload, api_key_, 3,
                       std::chrono::milliseconds(500), sleeper)
                 .body;
    } catch (const GatewayError& e) {
      throw EmbedderError(e.what());
    }
    const auto& data = body.at("data");
    if (data.size() != batch.size()) throw EmbedderError("embedding endpoint returned wrong batch size");
    std::vector<EmbeddingVector> chunk(batch.size());
    for (const auto& item : data) {
      const auto idx = item.value("index", std::size_t{0});
      if (idx >= chunk.size()) throw EmbedderError("embedding index out of range");
      chunk[idx] = EmbeddingVector(item.at("embedding").get<std::vector<double>>());
    }
    for (auto& v : chunk) {
      if (dim_ == 0) dim_ = v.dim();
      if (v.dim() != dim_) throw EmbedderError("embedding endpoint returned mixed dimensions");
      out.push_back(std::move(v));
    }
  }
  return out;
}

std::size_t HttpEmbedder::dim() const { return dim_; }

}  // namespace coder_forge
