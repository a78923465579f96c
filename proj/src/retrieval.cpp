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

#include "derag/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace derag {

std::string_view to_string(RetrieverKind k) { return k == RetrieverKind::dense ? "dense" : "bm25"; }

RetrieverKind parse_retriever_kind(std::string_view s) {
  if (s == "dense") return RetrieverKind::dense;
  if (s == "bm25" || s == "sparse") return RetrieverKind::sparse;
  throw InvalidArgument("unknown retriever '" + std::string(s) + "'");
}

namespace {

void check_k(int k, Eigen::Index n) {
  if (k < 1 || k > n)
    throw InvalidArgument("k=" + std::to_string(k) + " out of range [1, " + std::to_string(n) + "]");
}

}  // namespace

float tau_k(const Vecf& scores, int k) {
  check_k(k, scores.size());
  std::vector<float> v(scores.data(), scores.data() + scores.size());
  auto nth = v.begin() + (k - 1);
  std::nth_element(v.begin(), nth, v.end(), std::greater<float>());
  return *nth;
}

int rank_of(const Vecf& scores, std::size_t target) {
  if (target >= static_cast<std::size_t>(scores.size())) throw InvalidArgument("rank_of: unknown target");
  return rank_of_score(scores, scores[static_cast<Eigen::Index>(target)]);
}

int rank_of_score(const Vecf& scores, float score) {
  return 1 + static_cast<int>((scores.array() > score).count());
}

std::vector<std::size_t> top_k_indices(const Vecf& scores, int k) {
  check_k(k, scores.size());
  std::vector<std::size_t> idx(static_cast<std::size_t>(scores.size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto better = [&](std::size_t a, std::size_t b) {
    const float sa = scores[static_cast<Eigen::Index>(a)];
    const float sb = scores[static_cast<Eigen::Index>(b)];
    return sa > sb || (sa == sb && a < b);
  };
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), better);
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

RankedList ranked_from_scores(const Vecf& scores, int k, const Corpus& corpus) {
  RankedList out;
  for (std::size_t i : top_k_indices(scores, k))
    out.push_back({i, corpus[i].doc_id, scores[static_cast<Eigen::Index>(i)]});
  return out;
}

// --- dense ----------------------------------------------------------------

DenseRetriever::DenseRetriever(const Corpus& corpus) : corpus_(&corpus) {
  if (!corpus.has_embeddings()) throw InvalidArgument("dense retrieval needs corpus embeddings");
  Vecf norms = corpus.embeddings().rowwise().norm();
  for (Eigen::Index i = 0; i < norms.size(); ++i)
    if (norms[i] == 0.0f) throw DegenerateInput("document '" + corpus[static_cast<std::size_t>(i)].doc_id + "' has a zero embedding");
  inv_norms_ = norms.cwiseInverse();
}

Vecf DenseRetriever::scores(const Vecf& e) const {
  if (e.size() != dim()) throw InvalidArgument("query dimension does not match corpus");
  const float n = e.norm();
  if (n == 0.0f) throw DegenerateInput("zero query embedding");
  Vecf s = (corpus_->embeddings() * e).cwiseProduct(inv_norms_) / n;
  return s.cwiseMax(-1.0f).cwiseMin(1.0f);
}

float DenseRetriever::score(const Vecf& e, std::size_t doc) const {
  const float n = e.norm();
  if (n == 0.0f) throw DegenerateInput("zero query embedding");
  const float c = corpus_->embedding(doc).dot(e) * inv_norms_[static_cast<Eigen::Index>(doc)] / n;
  return std::clamp(c, -1.0f, 1.0f);
}

// --- BM25 -----------------------------------------------------------------

Bm25Retriever::Bm25Retriever(const Corpus& corpus, Bm25Params params) : corpus_(&corpus), params_(params) {
  if (!(params.k1 > 0.0f)) throw InvalidArgument("bm25: k1 must be positive");
  if (params.b < 0.0f || params.b > 1.0f) throw InvalidArgument("bm25: b must lie in [0, 1]");
  for (std::size_t i = 0; i < corpus.size(); ++i)
    for (const auto& [term, tf] : corpus[i].term_freqs) postings_[term].emplace_back(static_cast<std::uint32_t>(i), tf);
  const double n = static_cast<double>(corpus.size());
  for (const auto& [term, plist] : postings_) {
    const double df = static_cast<double>(plist.size());
    const double idf = std::log((n - df + 0.5) / (df + 0.5));
    idf_.emplace(term, static_cast<float>(std::max(0.0, idf)));
  }
}

float Bm25Retriever::idf(const std::string& term) const {
  auto it = idf_.find(term);
  return it == idf_.end() ? 0.0f : it->second;
}

namespace {

float term_weight(float idf, float tf, float len, float avg_len, const Bm25Params& p) {
  const float norm = avg_len > 0.0f ? len / avg_len : 1.0f;
  return idf * tf * (p.k1 + 1.0f) / (tf + p.k1 * (1.0f - p.b + p.b * norm));
}

}  // namespace

float Bm25Retriever::score(std::span<const std::string> query_terms, const Document& doc) const {
  const float avg = static_cast<float>(corpus_->avg_doc_len());
  float s = 0.0f;
  for (const auto& t : query_terms) {
    auto it = doc.term_freqs.find(t);
    if (it == doc.term_freqs.end()) continue;
    s += term_weight(idf(t), static_cast<float>(it->second), static_cast<float>(doc.length), avg, params_);
  }
  return s;
}

Vecf Bm25Retriever::scores(std::span<const std::string> query_terms) const {
  Vecf s = Vecf::Zero(static_cast<Eigen::Index>(corpus_->size()));
  const float avg = static_cast<float>(corpus_->avg_doc_len());
  for (const auto& t : query_terms) {
    auto it = postings_.find(t);
    if (it == postings_.end()) continue;
    const float w = idf_.at(t);
    for (const auto& [doc, tf] : it->second)
      s[doc] += term_weight(w, static_cast<float>(tf), static_cast<float>((*corpus_)[doc].length), avg, params_);
  }
  return s;
}

// --- convenience ----------------------------------------------------------

float tau_k(const Vecf& e, int k, const DenseRetriever& r) { return tau_k(r.scores(e), k); }
float tau_k(std::span<const std::string> terms, int k, const Bm25Retriever& r) { return tau_k(r.scores(terms), k); }
int rank_of(const Vecf& e, std::size_t target, const DenseRetriever& r) { return rank_of(r.scores(e), target); }
int rank_of(std::span<const std::string> terms, std::size_t target, const Bm25Retriever& r) {
  return rank_of(r.scores(terms), target);
}
RankedList retrieve_topk(const Vecf& e, int k, const DenseRetriever& r) {
  return ranked_from_scores(r.scores(e), k, r.corpus());
}
RankedList retrieve_topk(std::span<const std::string> terms, int k, const Bm25Retriever& r) {
  return ranked_from_scores(r.scores(terms), k, r.corpus());
}

}  // namespace derag
