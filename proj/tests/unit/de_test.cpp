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

#include <set>

#include "derag/de.hpp"
#include "fake_scorer.hpp"
#include "support.hpp"

namespace derag {
namespace {

TEST(Donor, WorkedExample) {
  Eigen::Vector3d a(-0.045, -0.080, -0.005), b(-0.011, -0.044, 0.013), c(-0.022, -0.082, -0.010);
  const Eigen::Vector3d m = donor_vector(a, b, c, 0.5);
  EXPECT_NEAR(m[0], -0.0395, 1e-12);
  EXPECT_NEAR(m[1], -0.0610, 1e-12);
  EXPECT_NEAR(m[2], 0.0065, 1e-12);
  // The published values were computed from unrounded embeddings.
  const Eigen::Vector3d published(-0.0398, -0.0619, 0.0062);
  EXPECT_LE((m - published).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Donor, DimensionMismatchThrows) {
  Vecf a(2), b(3), c(2);
  a.setZero(); b.setZero(); c.setZero();
  EXPECT_THROW(donor_vector(a, b, c, 0.5f), InvalidArgument);
}

TokenTable line_table(int n) {
  Matf rows(n, 2);
  for (int i = 0; i < n; ++i) rows.row(i) << static_cast<float>(i), 0.0f;
  return testing::table_from_rows(rows);
}

TEST(Projector, NearestAndTies) {
  const TokenTable t = line_table(5);
  const TokenProjector p(t, {4, 1, 3});
  Vecf m(2);
  m << 2.0f, 0.0f;  // equidistant from 1 and 3
  EXPECT_EQ(p.nearest(m), 1u);
  const TokenProjector q(t, {3, 1});
  EXPECT_EQ(q.nearest(m), 3u);
  m << 9.0f, 5.0f;
  EXPECT_EQ(p.nearest(m), 4u);
}

TEST(Projector, RejectsBadPools) {
  TokenTable t = line_table(4);
  EXPECT_THROW(TokenProjector(t, {}), InvalidArgument);
  EXPECT_THROW(TokenProjector(t, {7}), InvalidArgument);
  t.mark_special(TokenId{2});
  EXPECT_THROW(TokenProjector(t, {1, 2}), InvalidArgument);
}

TEST(Operators, InitCoversPoolAndKeepsBase) {
  const TokenTable t = line_table(6);
  const TokenProjector p(t, {0, 1, 2, 3, 4, 5});
  Rng rng(3);
  const Population pop = init_population({5}, 3, 12, p, rng);
  ASSERT_EQ(pop.members.size(), 12u);
  for (std::size_t d = 1; d < 3; ++d) {
    std::multiset<TokenId> seen;
    for (const auto& m : pop.members) {
      ASSERT_EQ(m.tokens.size(), 3u);
      EXPECT_EQ(m.tokens[0], 5u);
      seen.insert(m.tokens[d]);
    }
    for (TokenId id = 0; id < 6; ++id) EXPECT_EQ(seen.count(id), 2u);
  }
  EXPECT_THROW(init_population({1, 2}, 1, 4, p, rng), InvalidArgument);
}

TEST(Operators, ParentsDistinctAndNotTarget) {
  Rng rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t N = 4 + static_cast<std::size_t>(trial % 7);
    const std::size_t i = static_cast<std::size_t>(trial) % N;
    const auto [a, b, c] = pick_parents(i, N, rng);
    EXPECT_TRUE(a != b && b != c && a != c);
    EXPECT_TRUE(a != i && b != i && c != i);
    EXPECT_TRUE(a < N && b < N && c < N);
  }
  EXPECT_THROW(pick_parents(0, 3, rng), InvalidArgument);
  EXPECT_THROW(pick_parents(4, 4, rng), InvalidArgument);
}

TEST(Operators, CrossoverRates) {
  const TokenSeq target = {1, 1, 1, 1, 1, 1};
  const TokenSeq donor = {2, 2, 2, 2, 2, 2};
  Rng rng(9);
  for (int r = 0; r < 200; ++r) {
    const auto x = crossover(target, donor, 0.0f, rng);
    int taken = 0;
    for (std::size_t d = 0; d < 6; ++d) {
      taken += x.from_donor[d];
      EXPECT_EQ(x.trial[d], x.from_donor[d] ? 2u : 1u);
    }
    EXPECT_EQ(taken, 1);
    EXPECT_TRUE(x.from_donor[x.forced]);
    EXPECT_EQ(crossover(target, donor, 1.0f, rng).trial, donor);
  }
  EXPECT_THROW(crossover({}, {}, 0.5f, rng), InvalidArgument);
}

TEST(Operators, SelectionTieKeepsTrial) {
  Individual target{{1}, Evaluation{0.5, false, 3}};
  Individual trial{{2}, Evaluation{0.5, false, 3}};
  EXPECT_EQ(&select(target, trial), &trial);
  trial.eval->loss = 0.6;
  EXPECT_EQ(&select(target, trial), &target);
}

TEST(Operators, MutateProjectsEachPosition) {
  const TokenTable t = line_table(8);
  const TokenProjector p(t, {0, 1, 2, 3, 4, 5, 6, 7});
  // 2 + 0.5 * (6 - 2) = 4 ; 7 + 0.5 * (0 - 4) = 5
  EXPECT_EQ(mutate_donor({2, 7}, {6, 0}, {2, 4}, 0.5f, p), (TokenSeq{4, 5}));
  EXPECT_THROW(mutate_donor({1}, {1, 2}, {1}, 0.5f, p), InvalidArgument);
}

TEST(Config, Validation) {
  DEConfig c;
  EXPECT_NO_THROW(c.validate());
  auto bad = [](auto edit) {
    DEConfig d;
    edit(d);
    return d;
  };
  EXPECT_THROW(bad([](DEConfig& d) { d.N = 3; }).validate(), InvalidArgument);
  EXPECT_THROW(bad([](DEConfig& d) { d.F = 0.0f; }).validate(), InvalidArgument);
  EXPECT_THROW(bad([](DEConfig& d) { d.CR = 1.5f; }).validate(), InvalidArgument);
  EXPECT_THROW(bad([](DEConfig& d) { d.G = 0; }).validate(), InvalidArgument);
  EXPECT_THROW(bad([](DEConfig& d) { d.T = 0; }).validate(), InvalidArgument);
  EXPECT_THROW(bad([](DEConfig& d) { d.n_max = 0; }).validate(), InvalidArgument);
  EXPECT_EQ(bad([](DEConfig& d) { d.N = 10; d.G = 7; }).random_budget(), 70u);
}

// Target doc 1 sits below doc 0; each token contributes its id to doc 1.
struct Toy {
  TokenTable table = line_table(10);
  TokenProjector projector{table, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}};

  static Vecf scores_for(const TokenSeq& s, float need) {
    float sum = 0.0f;
    for (TokenId t : s) sum += static_cast<float>(t);
    Vecf v(3);
    v << need, sum, -1.0f;
    return v;
  }
};

TEST(Stage, ConstantLossRunsPatiencePlusOne) {
  Toy toy;
  testing::FakeScorer scorer(3, [](const TokenSeq&) {
    Vecf v(3);
    v << 1.0f, 0.0f, -1.0f;
    return v;
  });
  ObjectiveConfig oc;
  oc.k = 1;
  Objective obj(scorer, oc, 1, 0);
  DEConfig c;
  c.N = 6;
  c.T = 4;
  c.G = 50;
  const StageResult st = run_stage({}, 2, c, obj, toy.projector, 7);
  EXPECT_EQ(st.generations, c.T + 1);
  EXPECT_EQ(st.evaluations, static_cast<std::size_t>(c.N) * (1 + static_cast<std::size_t>(st.generations)));
  EXPECT_FALSE(st.success);
  EXPECT_EQ(st.best_loss_history.size(), static_cast<std::size_t>(st.generations));
}

TEST(Stage, ZeroLossHaltsAfterFirstGeneration) {
  Toy toy;
  testing::FakeScorer scorer(3, [](const TokenSeq& s) { return Toy::scores_for(s, 0.0f); });
  ObjectiveConfig oc;
  oc.k = 1;
  Objective obj(scorer, oc, 1, 0);
  DEConfig c;
  c.N = 5;
  const StageResult st = run_stage({}, 1, c, obj, toy.projector, 1);
  EXPECT_EQ(st.generations, 1);
  EXPECT_TRUE(st.success);
  EXPECT_EQ(st.best.eval->loss, 0.0);
}

TEST(Stage, BestLossHistoryIsMonotone) {
  Toy toy;
  testing::FakeScorer scorer(3, [](const TokenSeq& s) { return Toy::scores_for(s, 100.0f); });
  ObjectiveConfig oc;
  oc.k = 1;
  Objective obj(scorer, oc, 1, 0);
  DEConfig c;
  c.N = 8;
  c.G = 30;
  const StageResult st = run_stage({}, 3, c, obj, toy.projector, 4);
  for (std::size_t g = 1; g < st.best_loss_history.size(); ++g)
    EXPECT_LE(st.best_loss_history[g], st.best_loss_history[g - 1]);
}

struct SearchCase {
  Variant variant;
  float need;  // doc 0 score; the target wins once the token sum reaches it
};

SearchResult search(Variant v, float need, std::uint64_t seed, std::size_t* calls = nullptr) {
  Toy toy;
  testing::FakeScorer scorer(3, [need](const TokenSeq& s) { return Toy::scores_for(s, need); });
  ObjectiveConfig oc;
  oc.k = 1;
  Objective obj(scorer, oc, 1, 0);
  DEConfig c;
  c.N = 8;
  c.G = 40;
  c.T = 5;
  c.n_max = 4;
  c.variant = v;
  c.seed = seed;
  SearchResult r = run_search(c, obj, toy.projector);
  if (calls) *calls = scorer.calls;
  return r;
}

TEST(Search, SeqStopStopsAtShortestLength) {
  const SearchResult r = search(Variant::seq_stop, 15.0f, 1);
  EXPECT_EQ(r.final.loss, 0.0);
  EXPECT_EQ(r.suffix.size(), 2u);  // one token sums to at most 9
  EXPECT_EQ(r.stages_run, 2);
  EXPECT_EQ(r.stage_success, (std::vector<bool>{false, true}));
}

TEST(Search, FixedStopUsesNmax) {
  const SearchResult r = search(Variant::fixed_stop, 15.0f, 1);
  EXPECT_EQ(r.suffix.size(), 4u);
  EXPECT_EQ(r.stages_run, 1);
}

TEST(Search, SeqReturnsShortestSolvedButRunsAllStages) {
  const SearchResult r = search(Variant::seq, 15.0f, 1);
  EXPECT_EQ(r.stages_run, 4);
  EXPECT_EQ(r.suffix.size(), 2u);
  EXPECT_EQ(r.final.loss, 0.0);
}

TEST(Search, AlreadyInTopKReturnsEmpty) {
  std::size_t calls = 0;
  const SearchResult r = search(Variant::seq_stop, -5.0f, 1, &calls);
  EXPECT_TRUE(r.suffix.empty());
  EXPECT_EQ(r.evaluations, 0u);
  EXPECT_EQ(r.stages_run, 0);
  EXPECT_EQ(calls, 1u);  // the baseline only
}

TEST(Search, RandomRespectsBudget) {
  Toy toy;
  testing::FakeScorer scorer(3, [](const TokenSeq& s) { return Toy::scores_for(s, 1000.0f); });
  ObjectiveConfig oc;
  oc.k = 1;
  Objective obj(scorer, oc, 1, 0);
  DEConfig c;
  c.variant = Variant::random;
  c.N = 8;
  c.budget = 30;
  c.n_max = 3;
  const SearchResult r = run_search(c, obj, toy.projector);
  EXPECT_EQ(r.evaluations, 30u);
  EXPECT_EQ(obj.evaluations(), 30u);
  EXPECT_EQ(r.suffix.size(), 3u);
}

TEST(Search, Deterministic) {
  for (Variant v : {Variant::seq_stop, Variant::seq, Variant::fixed_stop, Variant::random}) {
    const SearchResult a = search(v, 22.0f, 17), b = search(v, 22.0f, 17);
    EXPECT_EQ(a.suffix, b.suffix);
    EXPECT_EQ(a.evaluations, b.evaluations);
    EXPECT_EQ(a.final.loss, b.final.loss);
  }
}

TEST(Search, VariantNames) {
  for (Variant v : {Variant::seq_stop, Variant::seq, Variant::fixed_stop, Variant::random})
    EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_THROW(parse_variant("greedy"), InvalidArgument);
}

}  // namespace
}  // namespace derag
