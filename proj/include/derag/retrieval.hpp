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

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "derag/common.hpp"
#include "derag/data_ingest.hpp"

namespace derag {

/// u.v / (|u||v|). Throws DegenerateInput on a zero vector.
template <typename DerivedU, typename DerivedV>
typename DerivedU::Scalar cosine_sim(const Eigen::MatrixBase<DerivedU>& u, const Eigen::MatrixBase<DerivedV>& v) {
  using Scalar = typename DerivedU::Scalar;
  if (u.size() != v.size()) throw InvalidArgument("cosine_sim: dimension mismatch");
  const Scalar nu = u.norm();
  const Scalar nv = v.norm();
  if (nu == Scalar(0) || nv == Scalar(0)) throw DegenerateInput("cosine_sim: zero vector");
  const Scalar c = u.dot(v.template cast<Scalar>()) / (nu * nv);
  return std::clamp(c, Scalar(-1), Scalar(1));
}

enum class RetrieverKind { dense, sparse };

std::string_view to_string(RetrieverKind k);
RetrieverKind parse_retriever_kind(std::string_view s);

struct RankedEntry {
  std::size_t index;
  std::string doc_id;
  float score;
};
using RankedList = std::vector<RankedEntry>;

/// k-th largest entry of `scores` (1-based k).
float tau_k(const Vecf& scores, int k);

/// 1 + number of entries strictly greater than scores[target].
int rank_of(const Vecf& scores, std::size_t target);

/// 1 + number of entries strictly greater than `score`.
int rank_of_score(const Vecf& scores, float score);

/// Indices of the k best scores; ties go to the lower index.
std::vector<std::size_t> top_k_indices(const Vecf& scores, int k);

/// Cosine scoring over the corpus embedding matrix. Stored vectors stay raw;
/// the inverse row norms are kept so each query costs one mat-vec.
class DenseRetriever {
 public:
  explicit DenseRetriever(const Corpus& corpus);

  const Corpus& corpus() const { return *corpus_; }
  std::size_t size() const { return corpus_->size(); }
  Eigen::Index dim() const { return corpus_->dim(); }

  /// Cosine similarity of `e` against every document.
  Vecf scores(const Vecf& e) const;
  float score(const Vecf& e, std::size_t doc) const;

 private:
  const Corpus* corpus_;
  Vecf inv_norms_;
};

struct Bm25Params {
  float k1 = 1.2f;
  float b = 0.75f;
};

class Bm25Retriever {
 public:
  Bm25Retriever(const Corpus& corpus, Bm25Params params = {});

  const Corpus& corpus() const { return *corpus_; }
  std::size_t size() const { return corpus_->size(); }
  const Bm25Params& params() const { return params_; }

  /// Robertson-Sparck-Jones idf floored at 0; 0 for unseen terms.
  float idf(const std::string& term) const;

  float score(std::span<const std::string> query_terms, const Document& doc) const;
  Vecf scores(std::span<const std::string> query_terms) const;

 private:
  const Corpus* corpus_;
  Bm25Params params_;
  std::unordered_map<std::string, float> idf_;
  // term -> (doc index, tf) postings
  std::unordered_map<std::string, std::vector<std::pair<std::uint32_t, int>>> postings_;
};

/// Scores for either retriever kind, from a query embedding or term list.
float tau_k(const Vecf& e, int k, const DenseRetriever& r);
float tau_k(std::span<const std::string> terms, int k, const Bm25Retriever& r);
int rank_of(const Vecf& e, std::size_t target, const DenseRetriever& r);
int rank_of(std::span<const std::string> terms, std::size_t target, const Bm25Retriever& r);
RankedList retrieve_topk(const Vecf& e, int k, const DenseRetriever& r);
RankedList retrieve_topk(std::span<const std::string> terms, int k, const Bm25Retriever& r);
RankedList ranked_from_scores(const Vecf& scores, int k, const Corpus& corpus);

}  // namespace derag
