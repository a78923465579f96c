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
#include <vector>

#include "derag/retrieval.hpp"
#include "derag/rng.hpp"
#include "derag/stats.hpp"

namespace derag {

struct ProbeConfig {
  double eta = 1e-3;
  int n_directions = 512;
  double eps_slope = 0.4;
  int grid = 41;
  int n_pert = 12;
  double eps_noise = 0.2;

  void validate() const {
    if (!(eta > 0.0)) throw InvalidArgument("probe: eta must be > 0");
    if (grid < 2) throw InvalidArgument("probe: grid must be >= 2");
    if (n_directions < 1) throw InvalidArgument("probe: n_directions must be >= 1");
    if (!(eps_slope > 0.0)) throw InvalidArgument("probe: eps_slope must be > 0");
  }
};

/// Forward difference [cos(q + eta u, d) - cos(q, d)] / eta.
template <typename DQ, typename DD, typename DU>
typename DQ::Scalar fd_directional_derivative(const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DD>& d,
                                              const Eigen::MatrixBase<DU>& u, typename DQ::Scalar eta) {
  return (cosine_sim(q + eta * u, d) - cosine_sim(q, d)) / eta;
}

/// d cos(q, d) / dq = d / (|q| |d|) - cos(q, d) q / |q|^2.
template <typename DQ, typename DD>
typename DQ::PlainObject cosine_gradient(const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DD>& d) {
  using Scalar = typename DQ::Scalar;
  const Scalar nq = q.norm();
  const Scalar nd = d.norm();
  if (nq == Scalar(0) || nd == Scalar(0)) throw DegenerateInput("cosine_gradient: zero vector");
  const Scalar c = q.dot(d) / (nq * nd);
  return d / (nq * nd) - c * q / (nq * nq);
}

template <typename Scalar>
Vector<Scalar> random_unit(Eigen::Index dim, Rng& rng) {
  for (;;) {
    Vector<Scalar> u = rng.gaussian<Scalar>(dim);
    const Scalar n = u.norm();
    if (n > Scalar(0)) return u / n;
  }
}

/// Index of the candidate direction with the largest forward-difference
/// derivative; ties go to the earlier candidate.
template <typename Scalar>
std::size_t best_direction(const Vector<Scalar>& q, const Vector<Scalar>& d,
                           std::span<const Vector<Scalar>> directions, Scalar eta) {
  if (directions.empty()) throw InvalidArgument("best_direction: no candidates");
  std::size_t best = 0;
  Scalar best_val = fd_directional_derivative(q, d, directions[0], eta);
  for (std::size_t i = 1; i < directions.size(); ++i) {
    const Scalar v = fd_directional_derivative(q, d, directions[i], eta);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  return best;
}

/// Steepest ascent direction of cos(., d) at q among n_directions random
/// unit vectors.
template <typename Scalar>
Vector<Scalar> estimate_d1(const Vector<Scalar>& q, const Vector<Scalar>& d, const ProbeConfig& config, Rng& rng) {
  config.validate();
  if (q.size() != d.size()) throw InvalidArgument("estimate_d1: dimension mismatch");
  std::vector<Vector<Scalar>> dirs;
  dirs.reserve(static_cast<std::size_t>(config.n_directions));
  for (int i = 0; i < config.n_directions; ++i) dirs.push_back(random_unit<Scalar>(q.size(), rng));
  return dirs[best_direction<Scalar>(q, d, dirs, static_cast<Scalar>(config.eta))];
}

/// Unit vector orthogonal to every vector in `basis` (assumed orthonormal),
/// by Gram-Schmidt on fresh Gaussian draws.
template <typename Scalar>
Vector<Scalar> orthogonal_direction(std::span<const Vector<Scalar>> basis, Eigen::Index dim, Rng& rng) {
  if (static_cast<Eigen::Index>(basis.size()) >= dim)
    throw DegenerateInput("no orthogonal direction left in dimension " + std::to_string(dim));
  for (int attempt = 0; attempt < 64; ++attempt) {
    Vector<Scalar> v = rng.gaussian<Scalar>(dim);
    // Two passes keep the result orthogonal to working precision.
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) v -= v.dot(b) * b;
    const Scalar n = v.norm();
    if (n > Scalar(1e-6)) return v / n;
  }
  throw DegenerateInput("orthogonal_direction: Gram-Schmidt kept degenerating");
}

template <typename Scalar>
struct SurfaceGrid {
  std::vector<Scalar> axis;  // shared alpha/beta coordinates
  RowMatrix<Scalar> values;  // values(i, j) = f(axis[i], axis[j])
  Vector<Scalar> d1;
  Vector<Scalar> d2;
};

template <typename Scalar>
std::vector<Scalar> grid_axis(int n) {
  std::vector<Scalar> a(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = Scalar(-1) + Scalar(2) * Scalar(i) / Scalar(n - 1);
  return a;
}

/// f(alpha, beta) = cos(q + alpha d1 + beta d2, d) on a grid over [-1, 1]^2,
/// d2 a fresh Gram-Schmidt direction orthogonal to d1.
template <typename Scalar>
SurfaceGrid<Scalar> scan_surface(const Vector<Scalar>& q, const Vector<Scalar>& d, const Vector<Scalar>& d1,
                                 const ProbeConfig& config, Rng& rng) {
  config.validate();
  if (std::abs(d1.norm() - Scalar(1)) > Scalar(1e-6)) throw InvalidArgument("scan_surface: d1 must be unit norm");
  SurfaceGrid<Scalar> g;
  g.d1 = d1;
  const Vector<Scalar> basis[] = {d1};
  g.d2 = orthogonal_direction<Scalar>(basis, q.size(), rng);
  g.axis = grid_axis<Scalar>(config.grid);
  g.values.resize(config.grid, config.grid);
  for (int i = 0; i < config.grid; ++i)
    for (int j = 0; j < config.grid; ++j)
      g.values(i, j) = cosine_sim(q + g.axis[static_cast<std::size_t>(i)] * g.d1 + g.axis[static_cast<std::size_t>(j)] * g.d2, d);
  return g;
}

/// |cos(q + delta, t) - cos(q, t)| / |delta| for one delta ~ N(0, eps^2 I).
template <typename Scalar>
Scalar local_slope(const Vector<Scalar>& q, const Vector<Scalar>& t, Scalar eps, Rng& rng) {
  if (!(eps > Scalar(0))) throw InvalidArgument("local_slope: eps must be > 0");
  const Vector<Scalar> delta = rng.gaussian<Scalar>(q.size(), eps);
  const Scalar n = delta.norm();
  if (n == Scalar(0)) throw DegenerateInput("local_slope: zero perturbation");
  return std::abs(cosine_sim(q + delta, t) - cosine_sim(q, t)) / n;
}

template <typename Scalar>
Scalar mean_local_slope(const Vector<Scalar>& q, const Vector<Scalar>& t, Scalar eps, int samples, Rng& rng) {
  if (samples < 1) throw InvalidArgument("mean_local_slope: samples must be >= 1");
  Scalar s(0);
  for (int i = 0; i < samples; ++i) s += local_slope(q, t, eps, rng);
  return s / Scalar(samples);
}

struct SlopeRankPair {
  std::string query_id;
  double lambda = 0.0;
  double delta_rank = 0.0;
};

struct SlopeRankResult {
  std::vector<SlopeRankPair> pairs;
  double r = 0.0;
  double p = 1.0;
};

/// Pearson r of lambda against delta_rank with its two-sided p-value.
inline SlopeRankResult correlate_slope_rank(std::vector<SlopeRankPair> pairs) {
  std::vector<double> x, y;
  for (const auto& p : pairs) {
    x.push_back(p.lambda);
    y.push_back(p.delta_rank);
  }
  SlopeRankResult out;
  out.r = pearson_r(x, y);
  out.p = pairs.size() >= 3 ? pearson_p(out.r, pairs.size()) : 1.0;
  out.pairs = std::move(pairs);
  return out;
}

}  // namespace derag
