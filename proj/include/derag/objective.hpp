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
#include <optional>
#include <span>
#include <vector>

#include "derag/encoder.hpp"
#include "derag/retrieval.hpp"
#include "derag/rng.hpp"

namespace derag {

enum class LossKind { hinge, cosine, robust_hinge };
enum class SuccessMode { literal, displacement };

std::string_view to_string(LossKind k);
LossKind parse_loss_kind(std::string_view s);
std::string_view to_string(SuccessMode m);
SuccessMode parse_success_mode(std::string_view s);

struct AttackTarget {
  const Query* query = nullptr;
  std::size_t target_index = 0;
  int k = 10;
};

struct LossValue {
  double value = 0.0;
  std::size_t encoder_calls = 0;
};

/// max{0, tau_k - scores[target]}. Zero exactly when rank_of(target) <= k.
double hinge_from_scores(const Vecf& scores, std::size_t target, int k);

/// Max over `n_pert` Gaussian perturbations q + delta, delta ~ N(0, eps^2 I),
/// of [s_(k) - s_target]_+ where s_(k) is the k-th best corpus score under
/// the perturbed query and s_target the perturbed query's cosine to `target`.
double robust_hinge(const Vecf& query, const Vecf& target, const DenseRetriever& retriever, int n_pert, float eps,
                    Rng& rng, int k = 10);

/// Scores of one augmented query.
struct CandidateScores {
  Vecf doc_scores;
  /// Similarity to the bare query treated as a pseudo-document.
  float query_self_score = 0.0f;
  /// Dense embedding of the augmented query; empty for sparse scoring.
  Vecf embedding;
};

/// Scores augmented queries (query + token sequence) against the corpus.
class QueryScorer {
 public:
  virtual ~QueryScorer() = default;
  virtual std::vector<CandidateScores> score(std::span<const TokenSeq> candidates) = 0;
  virtual std::size_t corpus_size() const = 0;
  virtual const DenseRetriever* dense() const { return nullptr; }
};

class DenseScorer final : public QueryScorer {
 public:
  DenseScorer(const DenseRetriever& retriever, SequenceEmbedder& embedder, const Query& query, Position position);

  std::vector<CandidateScores> score(std::span<const TokenSeq> candidates) override;
  std::size_t corpus_size() const override { return retriever_->size(); }
  const DenseRetriever* dense() const override { return retriever_; }
  SequenceEmbedder& embedder() { return *embedder_; }

 private:
  const DenseRetriever* retriever_;
  SequenceEmbedder* embedder_;
  const Query* query_;
  Position position_;
  Vecf query_embedding_;
};

/// BM25 over the re-tokenized text of query + token surfaces.
class SparseScorer final : public QueryScorer {
 public:
  SparseScorer(const Bm25Retriever& retriever, const TokenTable& table, const Query& query, Position position);

  std::vector<CandidateScores> score(std::span<const TokenSeq> candidates) override;
  std::size_t corpus_size() const override { return retriever_->size(); }

 private:
  const Bm25Retriever* retriever_;
  const TokenTable* table_;
  const Query* query_;
  Position position_;
  Document pseudo_doc_;
};

struct ObjectiveConfig {
  LossKind loss = LossKind::hinge;
  SuccessMode success = SuccessMode::literal;
  int k = 10;
  int robust_n_pert = 12;
  float robust_eps = 0.2f;
  int robust_k = 10;
  /// When set, the hinge threshold is taken over these documents plus the
  /// target instead of the whole corpus.
  std::optional<std::vector<std::size_t>> scoring_subset;
};

struct Evaluation {
  double loss = 0.0;
  bool success = false;
  int target_rank = 0;
};

/// The DE fitness function for one (query, target) pair.
class Objective {
 public:
  Objective(QueryScorer& scorer, ObjectiveConfig config, std::size_t target, std::uint64_t seed);

  std::vector<Evaluation> evaluate(std::span<const TokenSeq> candidates);
  Evaluation evaluate(const TokenSeq& candidate);

  /// Scores of the unmodified query (not counted as an evaluation).
  const CandidateScores& baseline() const { return baseline_; }
  std::size_t original_top() const { return original_top_; }
  std::size_t target() const { return target_; }
  const ObjectiveConfig& config() const { return config_; }
  std::size_t evaluations() const { return evaluations_.load(); }
  QueryScorer& scorer() { return *scorer_; }

  Evaluation judge(const CandidateScores& s, const TokenSeq& candidate) const;
  /// Stopping test: success, or zero loss for the hinge kinds.
  bool solved(const Evaluation& e) const;

 private:
  QueryScorer* scorer_;
  ObjectiveConfig config_;
  std::size_t target_;
  std::uint64_t seed_;
  CandidateScores baseline_;
  std::size_t original_top_ = 0;
  std::atomic<std::size_t> evaluations_{0};
};

/// Success rule. literal: target within top-k and the bare query, as a
/// pseudo-document, outside top-k. displacement: target within top-k and the
/// originally top-ranked document outside top-k.
bool success_from_scores(const CandidateScores& s, std::size_t target, int k, SuccessMode mode,
                         std::size_t original_top);

// Single-sequence forms over a dense retriever.
LossValue hinge_loss(std::span<const TokenId> s, const AttackTarget& target, const DenseRetriever& retriever,
                     SequenceEmbedder& embedder, Position position = Position::suffix);
LossValue hinge_loss(std::span<const TokenId> s, const AttackTarget& target, const Bm25Retriever& retriever,
                     const TokenTable& table, Position position = Position::suffix);
double cosine_loss(std::span<const TokenId> s, const AttackTarget& target, const DenseRetriever& retriever,
                   SequenceEmbedder& embedder, Position position = Position::suffix);
bool success_indicator(std::span<const TokenId> s, const AttackTarget& target, const DenseRetriever& retriever,
                       SequenceEmbedder& embedder, SuccessMode mode, Position position = Position::suffix);

}  // namespace derag
