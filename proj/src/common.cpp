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

#include "coder_forge/common.hpp"

#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>

#include <openssl/evp.h>

namespace coder_forge {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0x0f]);
  }
  return out;
}

std::string stable_id(std::string_view content, std::string_view language) {
  std::string buf;
  buf.reserve(language.size() + 1 + content.size());
  buf.append(language);
  buf.push_back('\0');
  buf.append(content);
  return sha256_hex(buf).substr(0, 32);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view key) {
  const std::string hex = sha256_hex(std::to_string(base) + "|" + std::string(key));
  return std::stoull(hex.substr(0, 16), nullptr, 16);
}

std::size_t utf8_length(std::string_view text) {
  std::size_t count = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++count;
  }
  return count;
}

std::string_view trim(std::string_view text) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
  return text;
}

std::string to_lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const Json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    Json record;
    try {
      record = Json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path.filename().string() + ": malformed JSON record (" + e.what() + ")",
                       line_no);
    }
    try {
      fn(record, line_no);
    } catch (const ParseError&) {
      throw;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.filename().string() + ": " + e.what(), line_no);
    }
  }
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path, WriteMode mode) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Truncation waits for the lock so a refused writer leaves the file intact.
  file_ = std::fopen(path.c_str(), "ab");
  if (!file_) throw Error("cannot open " + path.string() + " for writing: " + std::strerror(errno));
  if (::flock(::fileno(file_), LOCK_EX | LOCK_NB) != 0) {
    std::fclose(file_);
    file_ = nullptr;
    throw Error(path.string() + " is locked by another writer");
  }
  if (mode == WriteMode::Truncate && ::ftruncate(::fileno(file_), 0) != 0) {
    std::fclose(file_);
    file_ = nullptr;
    throw Error("cannot truncate " + path.string() + ": " + std::strerror(errno));
  }
}

JsonlWriter::~JsonlWriter() {
  if (file_) {
    std::fflush(file_);
    ::flock(::fileno(file_), LOCK_UN);
    std::fclose(file_);
  }
}

void JsonlWriter::write(const Json& record) {
  // Corpus content is not guaranteed to be valid UTF-8.
  write_line(record.dump(-1, ' ', false, Json::error_handler_t::replace));
}

void JsonlWriter::write_line(std::string_view line) {
  std::lock_guard lock(mu_);
  std::fwrite(line.data(), 1, line.size(), file_);
  std::fputc('\n', file_);
}

void JsonlWriter::flush() {
  std::lock_guard lock(mu_);
  std::fflush(file_);
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("CODER_FORGE_DATA_DIR"); env && *env) return env;
  return CODER_FORGE_DEFAULT_DATA_DIR;
}

}  // namespace coder_forge
