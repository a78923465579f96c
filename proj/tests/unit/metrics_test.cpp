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

#include <cmath>

#include "derag/metrics.hpp"
#include "derag/rng.hpp"

namespace derag {
namespace {

EvalRecord rec(int before, int after) {
  EvalRecord r;
  r.rank_before = before;
  r.rank_after = after;
  return r;
}

TEST(Metrics, SuccessAndMrr) {
  const std::vector<EvalRecord> rs = {rec(50, 1), rec(30, 12), rec(8, 8), rec(100, 25)};
  EXPECT_DOUBLE_EQ(success_at_k(rs, 1), 0.25);
  EXPECT_DOUBLE_EQ(success_at_k(rs, 10), 0.5);
  EXPECT_DOUBLE_EQ(success_at_k(rs, 20), 0.75);
  const double want = ((1.0 - 1.0 / 50) + (1.0 / 12 - 1.0 / 30) + 0.0 + (1.0 / 25 - 1.0 / 100)) / 4.0;
  EXPECT_NEAR(delta_mrr(rs), want, 1e-15);
  EXPECT_DOUBLE_EQ(mean_delta_rank(rs), (49 + 18 + 0 + 75) / 4.0);
  EXPECT_THROW(success_at_k({}, 1), InvalidArgument);
  EXPECT_THROW(delta_mrr(std::vector<EvalRecord>{rec(0, 1)}), InvalidArgument);
}

TEST(Metrics, NdcgGain) {
  EXPECT_DOUBLE_EQ(ndcg20_gain(1), 1.0);
  EXPECT_NEAR(ndcg20_gain(3), 0.5, 1e-15);
  EXPECT_NEAR(ndcg20_gain(20), std::log(2.0) / std::log(21.0), 1e-15);
  EXPECT_EQ(ndcg20_gain(21), 0.0);
  const std::vector<EvalRecord> rs = {rec(21, 1), rec(3, 7)};
  EXPECT_NEAR(delta_ndcg20(rs), (1.0 + (1.0 / 3.0 - 0.5)) / 2.0, 1e-15);
}

TEST(Metrics, DeltaCosModes) {
  EvalRecord r = rec(5, 1);
  r.cos_before = 0.2;
  r.cos_after = 0.5;
  r.cos_suffix = 0.4;
  const std::vector<EvalRecord> rs = {r};
  EXPECT_NEAR(delta_cos(rs, DeltaCosMode::query_baseline), 0.3, 1e-15);
  EXPECT_NEAR(delta_cos(rs, DeltaCosMode::paper_literal), 0.1, 1e-15);
  r.cos_suffix.reset();
  EXPECT_THROW(delta_cos(std::vector<EvalRecord>{r}, DeltaCosMode::paper_literal), InvalidArgument);
  EXPECT_EQ(parse_delta_cos_mode(to_string(DeltaCosMode::paper_literal)), DeltaCosMode::paper_literal);
}

TEST(Metrics, MarginalGain) {
  const auto g = marginal_gain({{1, 2.0}, {2, 5.0}, {3, 4.5}});
  EXPECT_EQ(g.size(), 2u);
  EXPECT_DOUBLE_EQ(g.at(2), 3.0);
  EXPECT_DOUBLE_EQ(g.at(3), -0.5);
  EXPECT_THROW(marginal_gain({{1, 0.0}, {3, 1.0}}), InvalidArgument);
}

TEST(Metrics, CumulativeCurveIsMonotone) {
  Rng rng(2);
  std::vector<std::optional<int>> first;
  for (int i = 0; i < 300; ++i) {
    const auto v = rng.index(7);
    first.push_back(v == 0 ? std::nullopt : std::optional<int>(static_cast<int>(v)));
  }
  const auto c = cumulative_success_curve(first, 6);
  ASSERT_EQ(c.size(), 6u);
  for (int L = 2; L <= 6; ++L) EXPECT_GE(c.at(L), c.at(L - 1));
  const auto hits = std::count_if(first.begin(), first.end(), [](const auto& f) { return f.has_value(); });
  EXPECT_DOUBLE_EQ(c.at(6), static_cast<double>(hits) / 300.0);
}

TEST(Metrics, ComplementarityPartitions) {
  const std::map<std::string, bool> s = {{"a", true}, {"b", true}, {"c", false}, {"d", false}};
  const std::map<std::string, bool> p = {{"a", true}, {"b", false}, {"c", true}, {"d", false}};
  const auto c = complementarity_table(s, p);
  EXPECT_EQ(c.both, 1);
  EXPECT_EQ(c.suffix_only, 1);
  EXPECT_EQ(c.prefix_only, 1);
  EXPECT_EQ(c.neither, 1);
  EXPECT_EQ(c.either, 3);
  EXPECT_EQ(c.total(), 4);
  EXPECT_THROW(complementarity_table(s, {{"a", true}}), InvalidArgument);
}

std::vector<DetectorSample> samples() {
  // clean 0..9, adversarial 5..14
  std::vector<DetectorSample> out;
  for (int i = 0; i < 10; ++i) out.push_back({static_cast<double>(i), false});
  for (int i = 5; i < 15; ++i) out.push_back({static_cast<double>(i) + 0.5, true});
  return out;
}

TEST(Detector, HandCounts) {
  const std::vector<double> fprs = {0.1, 0.0};
  const auto rep = detector_eval(samples(), fprs);
  ASSERT_EQ(rep.points.size(), 2u);
  const auto& p = rep.points[0];  // threshold 8.5 flags clean 9 only
  EXPECT_DOUBLE_EQ(p.threshold, 8.5);
  EXPECT_EQ(p.fp, 1);
  EXPECT_EQ(p.tp, 7);
  EXPECT_DOUBLE_EQ(p.actual_fpr, 0.1);
  EXPECT_EQ(rep.points[1].fp, 0);
  // Brute-force AUROC over all pairs.
  double wins = 0.0;
  const auto xs = samples();
  for (const auto& a : xs)
    for (const auto& b : xs)
      if (a.adversarial && !b.adversarial) wins += a.score > b.score ? 1.0 : (a.score == b.score ? 0.5 : 0.0);
  EXPECT_NEAR(rep.auroc, wins / 100.0, 1e-12);
}

TEST(Detector, InvariantUnderMonotoneTransform) {
  const std::vector<double> fprs = {0.05, 0.2};
  const auto base = detector_eval(samples(), fprs);
  auto warped = samples();
  for (auto& s : warped) s.score = std::exp(0.3 * s.score) - 4.0;
  const auto w = detector_eval(warped, fprs);
  EXPECT_NEAR(w.auroc, base.auroc, 1e-12);
  EXPECT_NEAR(w.auprc, base.auprc, 1e-12);
  for (std::size_t i = 0; i < fprs.size(); ++i) {
    EXPECT_EQ(w.points[i].tp, base.points[i].tp);
    EXPECT_EQ(w.points[i].fp, base.points[i].fp);
  }
}

TEST(Detector, PolarityFlip) {
  auto flipped = samples();
  for (auto& s : flipped) s.score = -s.score;
  const std::vector<double> fprs = {0.1};
  const auto a = detector_eval(samples(), fprs, true);
  const auto b = detector_eval(flipped, fprs, false);
  EXPECT_NEAR(a.auroc, b.auroc, 1e-12);
  EXPECT_EQ(a.points[0].tp, b.points[0].tp);
  EXPECT_DOUBLE_EQ(b.points[0].threshold, -a.points[0].threshold);
}

TEST(Detector, FprNeverExceedsTarget) {
  Rng rng(12);
  std::vector<DetectorSample> xs;
  for (int i = 0; i < 400; ++i) xs.push_back({rng.normal() + (i % 3 == 0 ? 1.0 : 0.0), i % 3 == 0});
  const std::vector<double> fprs = {0.0, 0.01, 0.05, 0.1, 0.5, 1.0};
  for (const auto& p : detector_eval(xs, fprs).points) EXPECT_LE(p.actual_fpr, p.target_fpr + 1e-12);
  EXPECT_THROW(detector_eval(std::vector<DetectorSample>{{1.0, true}}, fprs), InvalidArgument);
}

}  // namespace
}  // namespace derag
