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

#include "derag/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "derag/rng.hpp"

namespace derag {

namespace {

std::vector<std::string> split_ws(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) out.push_back(std::move(w));
  return out;
}

Vecf normalized(Vecf v) {
  const float n = v.norm();
  if (n > 0.0f) v /= n;
  return v;
}

}  // namespace

std::string compose_text(std::string_view query_text, std::span<const TokenId> tokens, const TokenTable& table,
                         Position position) {
  std::string pieces;
  for (TokenId id : tokens) {
    const std::string& s = table[id].surface;
    if (s.starts_with("##") && !pieces.empty()) {
      pieces += s.substr(2);
    } else {
      if (!pieces.empty()) pieces += ' ';
      pieces += s;
    }
  }
  if (pieces.empty()) return std::string(query_text);
  if (query_text.empty()) return pieces;
  return position == Position::suffix ? std::string(query_text) + " " + pieces : pieces + " " + std::string(query_text);
}

// --- Encoder defaults -------------------------------------------------------

std::vector<Vecf> Encoder::embed_sequences(const Query& query, std::span<const TokenSeq> candidates,
                                           const TokenTable& table, Position position) {
  std::vector<std::string> texts;
  texts.reserve(candidates.size());
  for (const auto& c : candidates) texts.push_back(compose_text(query.text, c, table, position));
  return embed_batch(texts);
}

Vecf Encoder::embed_query(const Query& query) {
  if (query.embedding) return *query.embedding;
  std::string text = query.text;
  return embed_batch(std::span<const std::string>(&text, 1)).at(0);
}

// --- SyntheticEncoder ---------------------------------------------------------

SyntheticEncoder::SyntheticEncoder(const TokenTable& table, float mlm_temperature)
    : table_(&table), temperature_(mlm_temperature) {
  if (table.size() == 0) throw InvalidArgument("synthetic encoder needs a non-empty token table");
  unit_rows_ = table.embeddings();
  for (Eigen::Index i = 0; i < unit_rows_.rows(); ++i) {
    const float n = unit_rows_.row(i).norm();
    if (n > 0.0f) unit_rows_.row(i) /= n;
  }
}

EncoderInfo SyntheticEncoder::info() {
  return {table_->dim(), table_->size(), "synthetic-additive"};
}

Vecf SyntheticEncoder::word_vector(std::string_view word) const {
  if (auto id = table_->find(word)) return table_->embedding(*id);
  Rng rng(fnv1a(word));
  return rng.gaussian<float>(table_->dim(), 1.0f / std::sqrt(static_cast<float>(table_->dim())));
}

Vecf SyntheticEncoder::raw_text_vector(std::span<const std::string> words) const {
  Vecf v = Vecf::Zero(table_->dim());
  for (const auto& w : words) v += word_vector(w);
  return v;
}

std::vector<Vecf> SyntheticEncoder::embed_batch(std::span<const std::string> texts) {
  if (!texts.empty()) count_request();
  std::vector<Vecf> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    auto words = split_ws(t);
    out.push_back(normalized(raw_text_vector(words)));
  }
  return out;
}

std::vector<Vecf> SyntheticEncoder::embed_sequences(const Query& query, std::span<const TokenSeq> candidates,
                                                    const TokenTable& table, Position) {
  if (!candidates.empty()) count_request();
  const Vecf base = embed_query(query);
  std::vector<Vecf> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    Vecf v = base;
    for (TokenId id : c) v += table.embedding(id);
    out.push_back(normalized(std::move(v)));
  }
  return out;
}

Vecf SyntheticEncoder::embed_query(const Query& query) {
  if (query.embedding) return normalized(*query.embedding);
  return embed_batch(std::span<const std::string>(&query.text, 1)).at(0);
}

Vecd SyntheticEncoder::fill_distribution(const Vecf& context) const {
  const Eigen::Index n = unit_rows_.rows();
  const float cn = context.norm();
  if (cn == 0.0f) return Vecd::Constant(n, 1.0 / static_cast<double>(n));
  Vecd logits = ((unit_rows_ * context) / (cn * temperature_)).cast<double>();
  logits.array() -= logits.maxCoeff();
  Vecd p = logits.array().exp();
  return p / p.sum();
}

std::vector<MlmCandidate> SyntheticEncoder::mlm_fill(const std::string& text, int tail_len, int top_k) {
  count_request();
  if (top_k <= 0) return {};
  if (tail_len < 1) throw InvalidArgument("mlm_fill: tail_len must be >= 1");
  auto words = split_ws(text);
  const std::size_t masked = std::min<std::size_t>(static_cast<std::size_t>(tail_len), words.size());
  std::span<const std::string> context(words.data(), words.size() - masked);
  const Vecd p = fill_distribution(raw_text_vector(context));

  std::vector<TokenId> order(static_cast<std::size_t>(p.size()));
  std::iota(order.begin(), order.end(), TokenId{0});
  std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) { return p[a] > p[b]; });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(top_k)));
  std::vector<MlmCandidate> out;
  out.reserve(order.size());
  for (TokenId id : order) out.push_back({id, (*table_)[id].surface, static_cast<float>(p[id])});
  return out;
}

std::vector<NllScore> SyntheticEncoder::nll(std::span<const std::string> texts) {
  if (!texts.empty()) count_request();
  std::vector<NllScore> out;
  out.reserve(texts.size());
  const double uniform = std::log(static_cast<double>(table_->size()));
  for (const auto& t : texts) {
    auto words = split_ws(t);
    if (words.empty()) throw InvalidArgument("nll: empty text");
    const Vecf total = raw_text_vector(words);
    double sum = 0.0;
    for (const auto& w : words) {
      auto id = table_->find(w);
      if (!id) {
        sum += uniform;
        continue;
      }
      const Vecd p = fill_distribution(total - word_vector(w));
      sum += -std::log(std::max(p[*id], 1e-300));
    }
    const double mean = sum / static_cast<double>(words.size());
    out.push_back({static_cast<float>(mean), static_cast<float>(std::exp(mean))});
  }
  return out;
}

// --- SequenceEmbedder -------------------------------------------------------

Vecf SequenceEmbedder::embed_tokens(const Query& query, std::span<const TokenId> tokens, Position position) {
  TokenSeq seq(tokens.begin(), tokens.end());
  return embed_many(query, std::span<const TokenSeq>(&seq, 1), position).at(0);
}

std::vector<Vecf> SequenceEmbedder::embed_many(const Query& query, std::span<const TokenSeq> candidates,
                                               Position position) {
  std::vector<Vecf> out(candidates.size());
  std::vector<std::size_t> missing;
  {
    std::lock_guard lock(mu_);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      auto it = cache_.find(Key{query.query_id, static_cast<int>(position), candidates[i]});
      if (it != cache_.end())
        out[i] = it->second;
      else
        missing.push_back(i);
    }
  }
  if (missing.empty()) return out;

  // Dedupe so one batch never embeds the same sequence twice.
  std::vector<TokenSeq> unique;
  std::map<TokenSeq, std::size_t> slot;
  for (std::size_t i : missing)
    if (slot.emplace(candidates[i], unique.size()).second) unique.push_back(candidates[i]);

  auto fresh = encoder_->embed_sequences(query, unique, *table_, position);
  if (fresh.size() != unique.size()) throw ProtocolError("encoder returned the wrong number of embeddings");
  misses_ += unique.size();

  std::lock_guard lock(mu_);
  for (std::size_t u = 0; u < unique.size(); ++u)
    cache_.emplace(Key{query.query_id, static_cast<int>(position), unique[u]}, fresh[u]);
  for (std::size_t i : missing) out[i] = fresh[slot.at(candidates[i])];
  return out;
}

Vecf SequenceEmbedder::embed_query(const Query& query) {
  return embed_tokens(query, {}, Position::suffix);
}

Vecf SequenceEmbedder::embed_suffix_only(std::span<const TokenId> tokens) {
  std::string text = compose_text("", tokens, *table_, Position::suffix);
  return encoder_->embed_batch(std::span<const std::string>(&text, 1)).at(0);
}

std::size_t SequenceEmbedder::cache_size() const {
  std::lock_guard lock(mu_);
  return cache_.size();
}

}  // namespace derag
