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

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "derag/rng.hpp"
#include "derag/stats.hpp"

namespace derag {
namespace {

TEST(Stats, IncompleteBetaMatchesBoost) {
  for (double a : {0.5, 1.0, 2.5, 10.0, 40.0})
    for (double b : {0.5, 1.0, 3.0, 15.0})
      for (double x : {0.0, 0.01, 0.2, 0.5, 0.77, 0.99, 1.0})
        EXPECT_NEAR(incomplete_beta(a, b, x), boost::math::ibeta(a, b, x), 1e-10) << a << " " << b << " " << x;
}

TEST(Stats, StudentTMatchesBoost) {
  for (double df : {1.0, 2.5, 6.25, 30.0, 400.0}) {
    boost::math::students_t dist(df);
    for (double t : {-8.0, -2.1, -0.3, 0.0, 0.7, 3.3}) {
      EXPECT_NEAR(student_t_cdf(t, df), boost::math::cdf(dist, t), 1e-10);
      EXPECT_NEAR(student_t_two_sided(t, df), 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))),
                  1e-10);
    }
  }
}

TEST(Stats, MeanAndVariance) {
  const std::vector<double> x = {2, 4, 4, 4, 5, 5, 7, 9};
  EXPECT_DOUBLE_EQ(mean(x), 5.0);
  EXPECT_NEAR(sample_variance(x), 32.0 / 7.0, 1e-14);
}

TEST(Stats, WelchSymmetry) {
  Rng rng(4);
  std::vector<double> a, b;
  for (int i = 0; i < 30; ++i) a.push_back(rng.normal());
  for (int i = 0; i < 45; ++i) b.push_back(2.0 * rng.normal() + 0.5);
  const TTest ab = welch_t(a, b), ba = welch_t(b, a);
  EXPECT_NEAR(ab.t, -ba.t, 1e-12);
  EXPECT_NEAR(ab.df, ba.df, 1e-9);
  EXPECT_NEAR(ab.p, ba.p, 1e-12);
  EXPECT_GT(ab.p, 0.0);
  EXPECT_LE(ab.p, 1.0);
}

TEST(Stats, DegenerateInputsThrow) {
  const std::vector<double> c = {1, 1, 1};
  const std::vector<double> one = {3};
  EXPECT_THROW(welch_t(c, c), DegenerateInput);
  EXPECT_ANY_THROW(welch_t(one, c));
  const std::vector<double> y = {1, 2, 3};
  EXPECT_THROW(pearson_r(c, y), DegenerateInput);
  EXPECT_ANY_THROW(pearson_r(y, one));
}

TEST(Stats, PearsonAffineInvariant) {
  Rng rng(6);
  std::vector<double> x, y, x2, y2;
  for (int i = 0; i < 60; ++i) {
    x.push_back(rng.normal());
    y.push_back(0.6 * x.back() + rng.normal());
    x2.push_back(3.0 * x.back() - 7.0);
    y2.push_back(-0.5 * y.back() + 1.0);
  }
  const double r = pearson_r(x, y);
  EXPECT_NEAR(pearson_r(x2, y2), -r, 1e-12);
  EXPECT_NEAR(pearson_r(x, x), 1.0, 1e-12);
  // p from the t statistic with n - 2 degrees of freedom
  const double t = r * std::sqrt(58.0 / (1.0 - r * r));
  boost::math::students_t dist(58.0);
  EXPECT_NEAR(pearson_p(r, 60), 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 1e-10);
}

}  // namespace
}  // namespace derag
