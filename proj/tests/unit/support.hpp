// Copyright 2026 The derag Authors.
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
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "derag/data_ingest.hpp"

namespace derag::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("derag_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Corpus d0..d{n-1} with the given embedding rows.
inline Corpus corpus_from_rows(const Matf& rows) {
  std::vector<Document> docs;
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    docs.push_back(Document::from_text("d" + std::to_string(i), "doc " + std::to_string(i)));
  Corpus c(std::move(docs));
  c.set_embeddings(rows);
  return c;
}

/// Token table tok0..tok{n-1} with the given rows.
inline TokenTable table_from_rows(const Matf& rows) {
  std::vector<Token> toks;
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    toks.push_back({static_cast<TokenId>(i), "tok" + std::to_string(i), false});
  return TokenTable(std::move(toks), rows);
}

}  // namespace derag::testing
