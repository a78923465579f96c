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

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "derag/stats.hpp"

namespace derag {

struct EvalRecord {
  std::string query_id;
  int rank_before = 1;
  int rank_after = 1;
  std::optional<double> cos_before;  // cos(e_q, e_t)
  std::optional<double> cos_after;   // cos(e_{q||s}, e_t)
  std::optional<double> cos_suffix;  // cos(e_s, e_t)
  int suffix_len = 0;
  std::size_t iterations = 0;
};

double success_at_k(std::span<const EvalRecord> records, int k);

/// Mean of 1/rank_after - 1/rank_before.
double delta_mrr(std::span<const EvalRecord> records);

/// Single-relevant-item gain at cutoff 20: 1/log2(r+1) for r <= 20, else 0.
double ndcg20_gain(int rank);
double delta_ndcg20(std::span<const EvalRecord> records);

enum class DeltaCosMode { query_baseline, paper_literal };

std::string_view to_string(DeltaCosMode m);
DeltaCosMode parse_delta_cos_mode(std::string_view s);

/// query_baseline: mean cos_after - cos_before. paper_literal: mean
/// cos_after - cos_suffix.
double delta_cos(std::span<const EvalRecord> records, DeltaCosMode mode = DeltaCosMode::query_baseline);

/// Mean of rank_before - rank_after.
double mean_delta_rank(std::span<const EvalRecord> records);
double mean_suffix_len(std::span<const EvalRecord> records);
double mean_iterations(std::span<const EvalRecord> records);

/// gain(L) = m(L) - m(L-1) for every L whose predecessor is present. Throws
/// when lengths are not consecutive.
std::map<int, double> marginal_gain(const std::map<int, double>& mean_delta_rank);

/// Fraction of queries first succeeding at some length <= L, for
/// L = 1..n_max. nullopt means never.
std::map<int, double> cumulative_success_curve(std::span<const std::optional<int>> first_success_len, int n_max);

struct Complementarity {
  int suffix_only = 0;
  int prefix_only = 0;
  int both = 0;
  int neither = 0;
  int either = 0;
  int total() const { return suffix_only + prefix_only + both + neither; }
};

/// Partition of per-query success flags. Both maps must cover the same ids.
Complementarity complementarity_table(const std::map<std::string, bool>& suffix_success,
                                      const std::map<std::string, bool>& prefix_success);

struct DetectorSample {
  double score = 0.0;
  bool adversarial = false;
};

struct DetectorPoint {
  double target_fpr = 0.0;
  double threshold = 0.0;
  double actual_fpr = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int tp = 0, fp = 0, tn = 0, fn = 0;
};

struct DetectorReport {
  std::vector<DetectorPoint> points;
  double auroc = 0.0;
  double auprc = 0.0;
};

/// Thresholds at each target FPR, AUROC (Mann-Whitney, ties averaged) and
/// AUPRC (step-wise average precision). A sample is flagged when its score
/// is >= threshold, or <= threshold with `higher_is_adversarial` false.
DetectorReport detector_eval(std::span<const DetectorSample> samples, std::span<const double> target_fprs,
                             bool higher_is_adversarial = true);

}  // namespace derag
