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

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "derag/common.hpp"

namespace derag {

/// Lowercases ASCII and splits on every byte that is not an ASCII letter or
/// digit. Bytes >= 0x80 are kept inside words so UTF-8 text stays intact.
std::vector<std::string> tokenize(std::string_view text);

struct Document {
  std::string doc_id;
  std::string text;
  std::map<std::string, int> term_freqs;
  int length = 0;

  static Document from_text(std::string doc_id, std::string text);
};

/// Ordered document collection. Embeddings, when attached, live in one
/// row-major matrix whose row i belongs to docs[i].
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Document> docs);

  std::size_t size() const { return docs_.size(); }
  bool empty() const { return docs_.empty(); }
  const Document& operator[](std::size_t i) const { return docs_[i]; }
  const std::vector<Document>& docs() const { return docs_; }

  std::optional<std::size_t> find(std::string_view doc_id) const;
  std::size_t index_of(std::string_view doc_id) const;  // throws InvalidArgument

  double avg_doc_len() const { return avg_doc_len_; }

  bool has_embeddings() const { return has_embeddings_; }
  Eigen::Index dim() const { return dim_; }
  const Matf& embeddings() const { return embeddings_; }
  auto embedding(std::size_t i) const { return embeddings_.row(static_cast<Eigen::Index>(i)).transpose(); }

  /// Attaches a full embedding matrix; rows must follow corpus order.
  void set_embeddings(Matf embeddings);

 private:
  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> by_id_;
  double avg_doc_len_ = 0.0;
  Matf embeddings_;
  Eigen::Index dim_ = 0;
  bool has_embeddings_ = false;
};

struct Query {
  std::string query_id;
  std::string text;
  std::optional<Vecf> embedding;
  std::optional<std::string> target_id;
};

struct Token {
  TokenId token_id = 0;
  std::string surface;
  bool special = false;
};

/// Vocabulary with per-token embedding rows. Row i holds token id i.
class TokenTable {
 public:
  TokenTable() = default;
  TokenTable(std::vector<Token> tokens, Matf embeddings);

  std::size_t size() const { return tokens_.size(); }
  Eigen::Index dim() const { return embeddings_.cols(); }
  const Token& operator[](TokenId id) const { return tokens_.at(id); }
  const std::vector<Token>& tokens() const { return tokens_; }
  const Matf& embeddings() const { return embeddings_; }
  auto embedding(TokenId id) const { return embeddings_.row(static_cast<Eigen::Index>(id)).transpose(); }

  bool is_special(TokenId id) const { return tokens_.at(id).special; }
  void mark_special(TokenId id) { tokens_.at(id).special = true; }
  /// Marks every token whose surface appears in `surfaces`.
  void mark_special(std::span<const std::string> surfaces);

  /// Ids of all non-special tokens, ascending.
  std::vector<TokenId> searchable() const;
  std::optional<TokenId> find(std::string_view surface) const;

 private:
  std::vector<Token> tokens_;
  Matf embeddings_;
  std::unordered_map<std::string, TokenId> by_surface_;
};

struct EmbeddingMatrix {
  Matf values;
  std::vector<std::string> ids;  // row -> id
};

/// Binary container: "DERG", u32 version, u32 rows, u32 dim, then rows*dim
/// little-endian f32 row-major.
inline constexpr std::uint32_t kFormatVersion = 1;

Matf read_matrix_bin(const std::filesystem::path& path);
void write_matrix_bin(const std::filesystem::path& path, const Matf& m);

/// Default sidecar locations: foo.bin -> foo.ids.jsonl / foo.tokens.jsonl.
std::filesystem::path ids_sidecar(const std::filesystem::path& matrix_path);
std::filesystem::path tokens_sidecar(const std::filesystem::path& matrix_path);

Corpus load_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, const Corpus& corpus);

std::vector<Query> load_queries(const std::filesystem::path& path);
void write_queries(const std::filesystem::path& path, std::span<const Query> queries);

EmbeddingMatrix load_embedding_matrix(const std::filesystem::path& path,
                                      std::optional<std::filesystem::path> sidecar = std::nullopt);
void write_embedding_matrix(const std::filesystem::path& path, const EmbeddingMatrix& m,
                            std::optional<std::filesystem::path> sidecar = std::nullopt);

TokenTable load_token_table(const std::filesystem::path& path,
                            std::optional<std::filesystem::path> sidecar = std::nullopt,
                            std::span<const std::string> extra_specials = {});
void write_token_table(const std::filesystem::path& path, const TokenTable& table,
                       std::optional<std::filesystem::path> sidecar = std::nullopt);

/// Reorders `m` by id to corpus order and attaches it. Every doc needs a row.
void attach_embeddings(Corpus& corpus, const EmbeddingMatrix& m);
/// Sets Query::embedding from `m` by query id. Every query needs a row.
void attach_embeddings(std::span<Query> queries, const EmbeddingMatrix& m);

}  // namespace derag
