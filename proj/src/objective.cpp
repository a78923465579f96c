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

#include "derag/objective.hpp"

#include <algorithm>

namespace derag {

std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::hinge:
      return "hinge";
    case LossKind::cosine:
      return "cosine";
    case LossKind::robust_hinge:
      return "robust_hinge";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view s) {
  if (s == "hinge") return LossKind::hinge;
  if (s == "cosine" || s == "cos") return LossKind::cosine;
  if (s == "robust_hinge" || s == "robust") return LossKind::robust_hinge;
  throw InvalidArgument("unknown loss '" + std::string(s) + "'");
}

std::string_view to_string(SuccessMode m) { return m == SuccessMode::literal ? "literal" : "displacement"; }

SuccessMode parse_success_mode(std::string_view s) {
  if (s == "literal") return SuccessMode::literal;
  if (s == "displacement") return SuccessMode::displacement;
  throw InvalidArgument("unknown success mode '" + std::string(s) + "'");
}

double hinge_from_scores(const Vecf& scores, std::size_t target, int k) {
  const float tau = tau_k(scores, k);
  const float st = scores[static_cast<Eigen::Index>(target)];
  return std::max(0.0, static_cast<double>(tau) - static_cast<double>(st));
}

double robust_hinge(const Vecf& query, const Vecf& target, const DenseRetriever& retriever, int n_pert, float eps,
                    Rng& rng, int k) {
  if (n_pert < 1) throw InvalidArgument("robust_hinge: n_pert must be >= 1");
  double worst = 0.0;
  for (int p = 0; p < n_pert; ++p) {
    const Vecf q = query + rng.gaussian<float>(query.size(), eps);
    const Vecf s = retriever.scores(q);
    const double gap = static_cast<double>(tau_k(s, k)) - static_cast<double>(cosine_sim(q, target));
    worst = std::max(worst, gap);
  }
  return worst;
}

bool success_from_scores(const CandidateScores& s, std::size_t target, int k, SuccessMode mode,
                         std::size_t original_top) {
  if (rank_of(s.doc_scores, target) > k) return false;
  if (mode == SuccessMode::literal) return rank_of_score(s.doc_scores, s.query_self_score) > k;
  return rank_of(s.doc_scores, original_top) > k;
}

// --- scorers ----------------------------------------------------------------

DenseScorer::DenseScorer(const DenseRetriever& retriever, SequenceEmbedder& embedder, const Query& query,
                         Position position)
    : retriever_(&retriever), embedder_(&embedder), query_(&query), position_(position) {
  query_embedding_ = embedder.embed_query(query);
}

std::vector<CandidateScores> DenseScorer::score(std::span<const TokenSeq> candidates) {
  auto embs = embedder_->embed_many(*query_, candidates, position_);
  std::vector<CandidateScores> out(embs.size());
  for (std::size_t i = 0; i < embs.size(); ++i) {
    out[i].doc_scores = retriever_->scores(embs[i]);
    out[i].query_self_score = cosine_sim(embs[i], query_embedding_);
    out[i].embedding = std::move(embs[i]);
  }
  return out;
}

SparseScorer::SparseScorer(const Bm25Retriever& retriever, const TokenTable& table, const Query& query,
                           Position position)
    : retriever_(&retriever),
      table_(&table),
      query_(&query),
      position_(position),
      pseudo_doc_(Document::from_text(query.query_id, query.text)) {}

std::vector<CandidateScores> SparseScorer::score(std::span<const TokenSeq> candidates) {
  std::vector<CandidateScores> out(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto terms = tokenize(compose_text(query_->text, candidates[i], *table_, position_));
    out[i].doc_scores = retriever_->scores(terms);
    out[i].query_self_score = retriever_->score(terms, pseudo_doc_);
  }
  return out;
}

// --- objective --------------------------------------------------------------

Objective::Objective(QueryScorer& scorer, ObjectiveConfig config, std::size_t target, std::uint64_t seed)
    : scorer_(&scorer), config_(std::move(config)), target_(target), seed_(seed) {
  const std::size_t n = scorer.corpus_size();
  if (target >= n) throw InvalidArgument("objective: target index out of range");
  if (config_.k < 1 || static_cast<std::size_t>(config_.k) > n) throw InvalidArgument("objective: k out of range");
  if (config_.loss != LossKind::hinge && scorer.dense() == nullptr)
    throw InvalidArgument(std::string("loss '") + std::string(to_string(config_.loss)) + "' needs a dense retriever");
  if (config_.loss == LossKind::robust_hinge && static_cast<std::size_t>(config_.robust_k) > n)
    throw InvalidArgument("objective: robust k exceeds corpus size");
  if (config_.scoring_subset) {
    auto& sub = *config_.scoring_subset;
    for (std::size_t d : sub)
      if (d >= n) throw InvalidArgument("objective: scoring subset index out of range");
    if (std::find(sub.begin(), sub.end(), target) == sub.end()) sub.push_back(target);
    std::sort(sub.begin(), sub.end());
    sub.erase(std::unique(sub.begin(), sub.end()), sub.end());
    if (static_cast<std::size_t>(config_.k) > sub.size())
      throw InvalidArgument("objective: k exceeds scoring subset size");
  }
  TokenSeq empty;
  baseline_ = scorer.score(std::span<const TokenSeq>(&empty, 1)).at(0);
  original_top_ = top_k_indices(baseline_.doc_scores, 1).front();
}

Evaluation Objective::judge(const CandidateScores& s, const TokenSeq& candidate) const {
  Evaluation e;
  e.target_rank = rank_of(s.doc_scores, target_);
  e.success = success_from_scores(s, target_, config_.k, config_.success, original_top_);
  switch (config_.loss) {
    case LossKind::hinge:
      if (config_.scoring_subset) {
        const auto& sub = *config_.scoring_subset;
        Vecf restricted(static_cast<Eigen::Index>(sub.size()));
        std::size_t tpos = 0;
        for (std::size_t i = 0; i < sub.size(); ++i) {
          restricted[static_cast<Eigen::Index>(i)] = s.doc_scores[static_cast<Eigen::Index>(sub[i])];
          if (sub[i] == target_) tpos = i;
        }
        e.loss = hinge_from_scores(restricted, tpos, config_.k);
      } else {
        e.loss = hinge_from_scores(s.doc_scores, target_, config_.k);
      }
      break;
    case LossKind::cosine:
      e.loss = -static_cast<double>(s.doc_scores[static_cast<Eigen::Index>(target_)]);
      break;
    case LossKind::robust_hinge: {
      // Keyed by the candidate so the value does not depend on call order.
      std::uint64_t h = candidate.size();
      for (TokenId t : candidate) h = splitmix64(h ^ t);
      Rng rng(derive_seed(seed_, {h}));
      const auto* dense = scorer_->dense();
      e.loss = robust_hinge(s.embedding, dense->corpus().embedding(target_), *dense, config_.robust_n_pert,
                            config_.robust_eps, rng, config_.robust_k);
      break;
    }
  }
  return e;
}

bool Objective::solved(const Evaluation& e) const {
  return e.success || (config_.loss != LossKind::cosine && e.loss == 0.0);
}

std::vector<Evaluation> Objective::evaluate(std::span<const TokenSeq> candidates) {
  auto scores = scorer_->score(candidates);
  evaluations_ += candidates.size();
  std::vector<Evaluation> out;
  out.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) out.push_back(judge(scores[i], candidates[i]));
  return out;
}

Evaluation Objective::evaluate(const TokenSeq& candidate) {
  return evaluate(std::span<const TokenSeq>(&candidate, 1)).at(0);
}

// --- single-sequence forms --------------------------------------------------

namespace {

const Query& query_of(const AttackTarget& t) {
  if (t.query == nullptr) throw InvalidArgument("attack target has no query");
  return *t.query;
}

}  // namespace

LossValue hinge_loss(std::span<const TokenId> s, const AttackTarget& target, const DenseRetriever& retriever,
                     SequenceEmbedder& embedder, Position position) {
  const std::size_t before = embedder.misses();
  const Vecf e = embedder.embed_tokens(query_of(target), s, position);
  return {hinge_from_scores(retriever.scores(e), target.target_index, target.k), embedder.misses() - before};
}

LossValue hinge_loss(std::span<const TokenId> s, const AttackTarget& target, const Bm25Retriever& retriever,
                     const TokenTable& table, Position position) {
  const auto terms = tokenize(compose_text(query_of(target).text, s, table, position));
  return {hinge_from_scores(retriever.scores(terms), target.target_index, target.k), 0};
}

double cosine_loss(std::span<const TokenId> s, const AttackTarget& target, const DenseRetriever& retriever,
                   SequenceEmbedder& embedder, Position position) {
  const Vecf e = embedder.embed_tokens(query_of(target), s, position);
  return -static_cast<double>(retriever.score(e, target.target_index));
}

bool success_indicator(std::span<const TokenId> s, const AttackTarget& target, const DenseRetriever& retriever,
                       SequenceEmbedder& embedder, SuccessMode mode, Position position) {
  const Query& q = query_of(target);
  const Vecf e = embedder.embed_tokens(q, s, position);
  CandidateScores cs;
  cs.doc_scores = retriever.scores(e);
  cs.query_self_score = cosine_sim(e, embedder.embed_query(q));
  std::size_t top = 0;
  if (mode == SuccessMode::displacement)
    top = top_k_indices(retriever.scores(embedder.embed_query(q)), 1).front();
  return success_from_scores(cs, target.target_index, target.k, mode, top);
}

}  // namespace derag
