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
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "derag/common.hpp"
#include "derag/data_ingest.hpp"

namespace derag {

struct MlmCandidate {
  TokenId token_id = 0;
  std::string surface;
  float prob = 0.0f;
};

struct NllScore {
  float nll = 0.0f;
  float ppl = 1.0f;
};

struct EncoderInfo {
  Eigen::Index dim = 0;
  std::size_t vocab_size = 0;
  std::string model_id;
};

/// Joins a query with token surfaces. WordPiece continuations ("##x") are
/// glued to the preceding piece.
std::string compose_text(std::string_view query_text, std::span<const TokenId> tokens, const TokenTable& table,
                         Position position);

/// Text -> vector model plus the masked-LM helpers used for pooling and
/// fluency scoring.
class Encoder {
 public:
  virtual ~Encoder() = default;

  virtual EncoderInfo info() = 0;
  virtual std::vector<Vecf> embed_batch(std::span<const std::string> texts) = 0;
  /// Averaged fill-mask distribution over the last `tail_len` positions,
  /// best `top_k` entries, probability descending.
  virtual std::vector<MlmCandidate> mlm_fill(const std::string& text, int tail_len, int top_k) = 0;
  virtual std::vector<NllScore> nll(std::span<const std::string> texts) = 0;

  /// Embeddings of query+tokens for each candidate sequence. The default
  /// composes the text and calls embed_batch.
  virtual std::vector<Vecf> embed_sequences(const Query& query, std::span<const TokenSeq> candidates,
                                            const TokenTable& table, Position position);

  /// Embedding of the bare query (uses Query::embedding when present).
  virtual Vecf embed_query(const Query& query);

  std::size_t requests() const { return requests_.load(); }

 protected:
  void count_request(std::size_t n = 1) { requests_ += n; }

 private:
  std::atomic<std::size_t> requests_{0};
};

/// Deterministic test double. Words map to vectors: a token-table surface
/// maps to its embedding row, any other word to a hashed Gaussian vector.
/// Text embedding = normalize(sum of word vectors). The augmented query is
/// additive: M(q || s) = normalize(M(q) + sum_d emb(s_d)), for either
/// position.
class SyntheticEncoder : public Encoder {
 public:
  explicit SyntheticEncoder(const TokenTable& table, float mlm_temperature = 0.2f);

  EncoderInfo info() override;
  std::vector<Vecf> embed_batch(std::span<const std::string> texts) override;
  std::vector<MlmCandidate> mlm_fill(const std::string& text, int tail_len, int top_k) override;
  std::vector<NllScore> nll(std::span<const std::string> texts) override;
  std::vector<Vecf> embed_sequences(const Query& query, std::span<const TokenSeq> candidates,
                                    const TokenTable& table, Position position) override;
  /// Unit-normalized; uses Query::embedding when present.
  Vecf embed_query(const Query& query) override;

  Vecf word_vector(std::string_view word) const;

 private:
  Vecf raw_text_vector(std::span<const std::string> words) const;
  /// Softmax over the vocabulary given a context vector.
  Vecd fill_distribution(const Vecf& context) const;

  const TokenTable* table_;
  float temperature_;
  Matf unit_rows_;
};

struct EncoderEndpoint {
  std::string base_url;
  int timeout_ms = 30000;
  int max_batch = 64;
  int retries = 2;
};

/// JSON-over-HTTP client for the encoder sidecar
/// (/info, /embed, /mlm_fill, /nll).
class HttpEncoder : public Encoder {
 public:
  explicit HttpEncoder(EncoderEndpoint endpoint);

  EncoderInfo info() override;
  std::vector<Vecf> embed_batch(std::span<const std::string> texts) override;
  std::vector<MlmCandidate> mlm_fill(const std::string& text, int tail_len, int top_k) override;
  std::vector<NllScore> nll(std::span<const std::string> texts) override;
  /// GET /healthz; false on any transport or status failure.
  bool healthy();

  const EncoderEndpoint& endpoint() const { return endpoint_; }

 private:
  std::string post(const std::string& path, const std::string& body);
  std::string get(const std::string& path);

  EncoderEndpoint endpoint_;
  std::mutex mu_;
  std::optional<Eigen::Index> dim_;
};

/// Per-attack embedding cache keyed by (query id, position, token tuple).
/// Safe for concurrent insert-or-get.
class SequenceEmbedder {
 public:
  SequenceEmbedder(Encoder& encoder, const TokenTable& table) : encoder_(&encoder), table_(&table) {}

  Vecf embed_tokens(const Query& query, std::span<const TokenId> tokens, Position position);
  std::vector<Vecf> embed_many(const Query& query, std::span<const TokenSeq> candidates, Position position);
  Vecf embed_query(const Query& query);
  /// Embedding of the token surfaces alone, without the query.
  Vecf embed_suffix_only(std::span<const TokenId> tokens);

  Encoder& encoder() { return *encoder_; }
  const TokenTable& table() const { return *table_; }
  std::size_t cache_size() const;
  std::size_t misses() const { return misses_.load(); }

 private:
  using Key = std::tuple<std::string, int, TokenSeq>;

  Encoder* encoder_;
  const TokenTable* table_;
  mutable std::mutex mu_;
  std::map<Key, Vecf> cache_;
  std::atomic<std::size_t> misses_{0};
};

}  // namespace derag
