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

#include <cmath>

#include <gtest/gtest.h>

#include "derag/retrieval.hpp"
#include "derag/rng.hpp"
#include "support.hpp"

namespace derag {
namespace {

TEST(Cosine, KnownValue) {
  Vecd u(3), v(3);
  u << 1, 2, 3;
  v << 4, 5, 6;
  EXPECT_NEAR(cosine_sim(u, v), 32.0 / std::sqrt(14.0 * 77.0), 1e-15);
  EXPECT_NEAR(cosine_sim(u, v), 0.974631846, 1e-9);
}

TEST(Cosine, ZeroVectorAndMismatch) {
  Vecf z = Vecf::Zero(3), u = Vecf::Ones(3), w = Vecf::Ones(2);
  EXPECT_THROW(cosine_sim(z, u), DegenerateInput);
  EXPECT_THROW(cosine_sim(u, w), InvalidArgument);
}

TEST(Ranking, TauAndRankWithTies) {
  Vecf s(5);
  s << 0.5f, 0.9f, 0.5f, 0.1f, 0.7f;
  EXPECT_EQ(tau_k(s, 1), 0.9f);
  EXPECT_EQ(tau_k(s, 3), 0.5f);
  EXPECT_EQ(tau_k(s, 4), 0.5f);
  EXPECT_EQ(rank_of(s, 0), 3);
  EXPECT_EQ(rank_of(s, 2), 3);
  EXPECT_EQ(rank_of(s, 3), 5);
  EXPECT_EQ(rank_of_score(s, 0.8f), 2);
  EXPECT_THROW(tau_k(s, 0), InvalidArgument);
  EXPECT_THROW(tau_k(s, 6), InvalidArgument);
}

TEST(Ranking, TopKBreaksTiesByIndex) {
  Vecf s(5);
  s << 0.5f, 0.9f, 0.5f, 0.1f, 0.7f;
  EXPECT_EQ(top_k_indices(s, 4), (std::vector<std::size_t>{1, 4, 0, 2}));
}

TEST(Ranking, RankWithinKIffScoreReachesTau) {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng.index(40));
    Vecf s(n);
    // Coarse values make ties common.
    for (int i = 0; i < n; ++i) s[i] = static_cast<float>(rng.index(6)) / 5.0f;
    const int k = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(n)));
    const float tau = tau_k(s, k);
    for (int i = 0; i < n; ++i) EXPECT_EQ(rank_of(s, static_cast<std::size_t>(i)) <= k, s[i] >= tau);
  }
}

TEST(DenseRetriever, ScoresAreCosines) {
  Matf rows(3, 2);
  rows << 1, 0, 0, 2, 3, 3;
  const Corpus c = testing::corpus_from_rows(rows);
  const DenseRetriever r(c);
  Vecf q(2);
  q << 1, 1;
  const Vecf s = r.scores(q);
  EXPECT_NEAR(s[0], 1.0 / std::sqrt(2.0), 1e-6);
  EXPECT_NEAR(s[1], 1.0 / std::sqrt(2.0), 1e-6);
  EXPECT_NEAR(s[2], 1.0, 1e-6);
  EXPECT_FLOAT_EQ(r.score(q, 2), s[2]);
  const RankedList top = retrieve_topk(q, 2, r);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_EQ(top[0].doc_id, "d2");
  EXPECT_EQ(top[1].doc_id, "d0");
}

TEST(Bm25, MatchesHandComputation) {
  Corpus c({Document::from_text("a", "apple banana apple"), Document::from_text("b", "banana cherry"),
            Document::from_text("c", "cherry date elder fig")});
  const Bm25Retriever r(c);
  // N = 3; df(apple) = 1, df(banana) = 2; avg length 3.
  const double idf_apple = std::log((3 - 1 + 0.5) / (1 + 0.5));
  EXPECT_NEAR(r.idf("apple"), idf_apple, 1e-6);
  EXPECT_EQ(r.idf("banana"), 0.0f);  // log(1.5 / 2.5) < 0 floors at 0
  EXPECT_EQ(r.idf("zebra"), 0.0f);
  const double k1 = 1.2, b = 0.75;
  const double want = idf_apple * 2 * (k1 + 1) / (2 + k1 * (1 - b + b * 3.0 / 3.0));
  const std::vector<std::string> q = {"apple"};
  EXPECT_NEAR(r.score(q, c[0]), want, 1e-5);
  const Vecf s = r.scores(q);
  EXPECT_NEAR(s[0], want, 1e-5);
  EXPECT_EQ(s[1], 0.0f);
  EXPECT_EQ(rank_of(q, 0, r), 1);
}

TEST(Bm25, ScoresAgreeWithPerDocumentScore) {
  Corpus c({Document::from_text("a", "x y z x"), Document::from_text("b", "y y w"), Document::from_text("c", "q r"),
            Document::from_text("d", "x w w w w")});
  const Bm25Retriever r(c);
  const std::vector<std::string> q = {"x", "w", "q"};
  const Vecf s = r.scores(q);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(s[static_cast<Eigen::Index>(i)], r.score(q, c[i]), 1e-6);
}

}  // namespace
}  // namespace derag
