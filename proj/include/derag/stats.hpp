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

#include "derag/common.hpp"

namespace derag {

/// I_x(a, b) by Lentz's continued fraction; absolute error below 1e-12 for
/// the parameter ranges the t-tests use.
double incomplete_beta(double a, double b, double x);

/// P(T <= t) for Student's t with `df` > 0 degrees of freedom (real df).
double student_t_cdf(double t, double df);

/// Two-sided p-value for statistic t.
double student_t_two_sided(double t, double df);

double mean(std::span<const double> x);
/// Unbiased (n - 1) sample variance.
double sample_variance(std::span<const double> x);

struct TTest {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

/// Welch's unequal-variance t-test with Welch-Satterthwaite dof.
TTest welch_t(std::span<const double> a, std::span<const double> b);

/// Sample Pearson correlation. Throws DegenerateInput on a constant series.
double pearson_r(std::span<const double> x, std::span<const double> y);

/// Two-sided p-value of r under H0: rho = 0, via t = r sqrt((n-2)/(1-r^2)).
double pearson_p(double r, std::size_t n);

}  // namespace derag
