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

#include <gtest/gtest.h>

#include "derag/encoder.hpp"
#include "derag/synthetic.hpp"
#include "support.hpp"

namespace derag {
namespace {

TEST(Synthetic, DenseWorldPlantsTargetRank) {
  DenseWorldSpec spec;
  spec.n_docs = 300;
  spec.dim = 8;
  spec.vocab = 40;
  spec.n_queries = 12;
  spec.target_rank = 25;
  const World w = make_dense_world(spec);
  EXPECT_EQ(w.corpus.size(), 300u);
  EXPECT_EQ(w.table.size(), 40u);
  ASSERT_EQ(w.queries.size(), 12u);
  const DenseRetriever r(w.corpus);
  for (const auto& q : w.queries) {
    ASSERT_TRUE(q.embedding && q.target_id);
    EXPECT_EQ(rank_of(r.scores(*q.embedding), w.corpus.index_of(*q.target_id)), 25);
  }
}

TEST(Synthetic, Deterministic) {
  DenseWorldSpec spec;
  spec.n_docs = 50;
  spec.n_queries = 3;
  spec.target_rank = 5;
  const World a = make_dense_world(spec), b = make_dense_world(spec);
  EXPECT_EQ(a.corpus.embeddings(), b.corpus.embeddings());
  EXPECT_EQ(a.table.embeddings(), b.table.embeddings());
  spec.seed = 2;
  EXPECT_NE(make_dense_world(spec).corpus.embeddings(), a.corpus.embeddings());
}

TEST(Synthetic, ClusterWorldPlantsTargetRank) {
  ClusterWorldSpec spec;
  spec.n_docs = 400;
  spec.n_queries = 5;
  spec.target_rank = 30;
  const World w = make_cluster_world(spec);
  const DenseRetriever r(w.corpus);
  for (const auto& q : w.queries)
    EXPECT_EQ(rank_of(r.scores(*q.embedding), w.corpus.index_of(*q.target_id)), 30);
}

TEST(Synthetic, TextWorldRanksUnderBm25) {
  TextWorldSpec spec;
  spec.n_queries = 10;
  spec.target_rank = 20;
  const World w = make_text_world(spec);
  EXPECT_EQ(w.table.searchable().size(), static_cast<std::size_t>(spec.vocab));
  const Bm25Retriever bm(w.corpus);
  // Ties can push the planted target just below the requested rank.
  for (const auto& q : w.queries) {
    const int r = rank_of(tokenize(q.text), w.corpus.index_of(*q.target_id), bm);
    EXPECT_GE(r, 20);
    EXPECT_LE(r, 25);
  }
}

TEST(Synthetic, SaveWorldLoadsBack) {
  DenseWorldSpec spec;
  spec.n_docs = 30;
  spec.vocab = 12;
  spec.n_queries = 2;
  spec.target_rank = 3;
  const World w = make_dense_world(spec);
  testing::TempDir dir;
  save_world(dir.path(), w);
  const Corpus c = load_corpus(dir / "corpus.jsonl");
  EXPECT_EQ(c.size(), 30u);
  const auto qs = load_queries(dir / "queries.jsonl");
  ASSERT_EQ(qs.size(), 2u);
  EXPECT_EQ(qs[1].target_id, w.queries[1].target_id);
}

}  // namespace
}  // namespace derag
