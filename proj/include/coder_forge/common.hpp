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

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

namespace coder_forge {

using Json = nlohmann::ordered_json;

/// Placeholder name -> value.
using Bindings = std::map<std::string, std::string>;

// ---------------------------------------------------------------------------
// Errors. Every failure surfaced by the library derives from Error; the CLI
// maps ConfigError to exit code 2 and everything else to 1.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg, std::size_t line = 0)
      : Error(line == 0 ? msg : "line " + std::to_string(line) + ": " + msg), line_(line) {}

  /// 1-based line of the offending record, 0 when not line-oriented.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class GatewayError : public Error {
 public:
  using Error::Error;
};

class EmbedderError : public Error {
 public:
  using Error::Error;
};

class InsufficientPoolError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// 128-bit stable id (32 hex chars) of a text tagged with a language.
/// Used for document ids, so it must never change across releases.
std::string stable_id(std::string_view content, std::string_view language);

/// Id of a free-standing text (generated positives, benchmark entries).
inline std::string text_id(std::string_view text) { return stable_id(text, ""); }

/// Deterministic 64-bit seed derived from a base seed and a key.
std::uint64_t derive_seed(std::uint64_t base, std::string_view key);

// ---------------------------------------------------------------------------
// Text helpers
// ---------------------------------------------------------------------------

/// Number of UTF-8 code points; invalid lead bytes count as one each.
std::size_t utf8_length(std::string_view text);

std::string_view trim(std::string_view text);

std::string to_lower(std::string_view text);

// ---------------------------------------------------------------------------
// JSON-lines
// ---------------------------------------------------------------------------

/// Calls `fn(record, line_number)` for every non-blank line. Parse failures
/// throw ParseError naming the line.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const Json&, std::size_t)>& fn);

enum class WriteMode { Truncate, Append };

/// Line writer holding an exclusive advisory lock on the file for its
/// lifetime; a second writer on the same path fails instead of interleaving.
class JsonlWriter {
 public:
  JsonlWriter(const std::filesystem::path& path, WriteMode mode);
  ~JsonlWriter();
  JsonlWriter(const JsonlWriter&) = delete;
  JsonlWriter& operator=(const JsonlWriter&) = delete;

  void write(const Json& record);
  void write_line(std::string_view line);
  void flush();

 private:
  std::FILE* file_ = nullptr;
  std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Bounded parallelism
// ---------------------------------------------------------------------------

/// Runs fn(i) for i in [0, n) on at most `jobs` threads. The first exception
/// thrown by any call is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  if (n == 0) return;
  if (jobs <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t workers = std::min(jobs, n);
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
}

/// Directory holding the bundled registry and instruction tables.
std::filesystem::path default_data_dir();

}  // namespace coder_forge
