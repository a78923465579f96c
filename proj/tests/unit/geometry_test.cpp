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

#include "derag/geometry.hpp"
#include "derag/harness.hpp"

namespace derag {
namespace {

// d/dq cos(q, d) written out by hand, independent of cosine_gradient.
Vecd analytic_grad(const Vecd& q, const Vecd& d) {
  const double qq = q.squaredNorm(), dd = d.squaredNorm(), qd = q.dot(d);
  return (d * qq - q * qd) / (std::pow(qq, 1.5) * std::sqrt(dd));
}

TEST(Geometry, GradientMatchesHandForm) {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const Vecd q = rng.gaussian<double>(16), d = rng.gaussian<double>(16);
    EXPECT_LE((cosine_gradient(q, d) - analytic_grad(q, d)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Geometry, ForwardDifferenceErrorScalesWithEta) {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const Vecd q = rng.gaussian<double>(32), d = rng.gaussian<double>(32);
    const Vecd u = random_unit<double>(32, rng);
    const double exact = analytic_grad(q, d).dot(u);
    // Forward-difference error is eta * |u' H u| / 2 and |H| <= 3 / |q|^2.
    for (double eta : {1e-3, 1e-5})
      EXPECT_LE(std::abs(fd_directional_derivative(q, d, u, eta) - exact), 1.5 * eta / q.squaredNorm() + 1e-10)
          << "eta " << eta;
  }
}

TEST(Geometry, D1IsUnitAndAscending) {
  Rng rng(3);
  const Vecd q = rng.gaussian<double>(24), d = rng.gaussian<double>(24);
  ProbeConfig cfg;
  const Vecd d1 = estimate_d1<double>(q, d, cfg, rng);
  EXPECT_NEAR(d1.norm(), 1.0, 1e-9);
  EXPECT_GT(analytic_grad(q, d).dot(d1), 0.0);
}

TEST(Geometry, GramSchmidtOrthogonality) {
  Rng rng(4);
  std::vector<Vecd> basis;
  for (int i = 0; i < 6; ++i) basis.push_back(orthogonal_direction<double>(basis, 6, rng));
  for (std::size_t i = 0; i < basis.size(); ++i) {
    EXPECT_NEAR(basis[i].norm(), 1.0, 1e-12);
    for (std::size_t j = 0; j < i; ++j) EXPECT_NEAR(basis[i].dot(basis[j]), 0.0, 1e-12);
  }
  EXPECT_THROW(orthogonal_direction<double>(basis, 6, rng), DegenerateInput);
}

TEST(Geometry, GridAxis) {
  const auto a = grid_axis<double>(41);
  EXPECT_EQ(a.front(), -1.0);
  EXPECT_EQ(a.back(), 1.0);
  EXPECT_EQ(a[20], 0.0);
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_NEAR(a[i] - a[i - 1], 0.05, 1e-15);
}

TEST(Geometry, SurfaceCentreIsBaseCosine) {
  Rng rng(5);
  const Vecd q = rng.gaussian<double>(12), d = rng.gaussian<double>(12);
  ProbeConfig cfg;
  cfg.grid = 21;
  const Vecd d1 = estimate_d1<double>(q, d, cfg, rng);
  const auto g = scan_surface<double>(q, d, d1, cfg, rng);
  EXPECT_EQ(g.values.rows(), 21);
  EXPECT_NEAR(g.values(10, 10), cosine_sim(q, d), 1e-15);
  EXPECT_NEAR(g.d1.dot(g.d2), 0.0, 1e-12);
  Vecd notunit = 2.0 * d1;
  EXPECT_THROW(scan_surface<double>(q, d, notunit, cfg, rng), InvalidArgument);
}

TEST(Geometry, LocalSlopeBoundedByGradientScale) {
  Rng rng(6);
  const Vecd q = rng.gaussian<double>(16), t = rng.gaussian<double>(16);
  // |cos(q + delta, t) - cos(q, t)| <= 2 always; with small eps the slope tracks the gradient.
  const double s = mean_local_slope(q, t, 1e-6, 200, rng);
  EXPECT_LE(s, analytic_grad(q, t).norm() * 1.0001);
  EXPECT_GT(s, 0.0);
  EXPECT_THROW(local_slope(q, t, 0.0, rng), InvalidArgument);
}

TEST(Geometry, ProbeCsvShape) {
  Rng rng(7);
  const Vecd q = rng.gaussian<double>(8), d = rng.gaussian<double>(8);
  ProbeConfig cfg;
  cfg.grid = 5;
  cfg.n_directions = 16;
  for (int plane : {2, 3}) {
    const std::string csv = probe_surface_csv(q, d, cfg, 11, plane);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 26);
    EXPECT_EQ(csv.rfind("alpha,beta,score\n", 0), 0u);
    EXPECT_EQ(csv, probe_surface_csv(q, d, cfg, 11, plane));
  }
}

TEST(Geometry, CorrelateSlopeRank) {
  std::vector<SlopeRankPair> pairs;
  for (int i = 0; i < 10; ++i) pairs.push_back({"q" + std::to_string(i), 0.1 * i, 3.0 * i + 1.0});
  const auto r = correlate_slope_rank(pairs);
  EXPECT_NEAR(r.r, 1.0, 1e-12);
  EXPECT_LT(r.p, 1e-6);
}

}  // namespace
}  // namespace derag
