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

#include "derag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace derag {

namespace {

void check_nonempty(std::span<const EvalRecord> r, const char* what) {
  if (r.empty()) throw InvalidArgument(std::string(what) + ": no records");
}

void check_rank(int r) {
  if (r < 1) throw InvalidArgument("rank must be >= 1");
}

template <typename Fn>
double mean_of(std::span<const EvalRecord> records, const char* what, Fn&& fn) {
  check_nonempty(records, what);
  double s = 0.0;
  for (const auto& r : records) s += fn(r);
  return s / static_cast<double>(records.size());
}

}  // namespace

double success_at_k(std::span<const EvalRecord> records, int k) {
  return mean_of(records, "success_at_k", [&](const EvalRecord& r) {
    check_rank(r.rank_after);
    return r.rank_after <= k ? 1.0 : 0.0;
  });
}

double delta_mrr(std::span<const EvalRecord> records) {
  return mean_of(records, "delta_mrr", [](const EvalRecord& r) {
    check_rank(r.rank_before);
    check_rank(r.rank_after);
    return 1.0 / r.rank_after - 1.0 / r.rank_before;
  });
}

double ndcg20_gain(int rank) {
  check_rank(rank);
  return rank <= 20 ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
}

double delta_ndcg20(std::span<const EvalRecord> records) {
  return mean_of(records, "delta_ndcg20",
                 [](const EvalRecord& r) { return ndcg20_gain(r.rank_after) - ndcg20_gain(r.rank_before); });
}

std::string_view to_string(DeltaCosMode m) {
  return m == DeltaCosMode::query_baseline ? "query_baseline" : "paper_literal";
}

DeltaCosMode parse_delta_cos_mode(std::string_view s) {
  if (s == "query_baseline") return DeltaCosMode::query_baseline;
  if (s == "paper_literal") return DeltaCosMode::paper_literal;
  throw InvalidArgument("unknown delta-cos mode '" + std::string(s) + "'");
}

double delta_cos(std::span<const EvalRecord> records, DeltaCosMode mode) {
  return mean_of(records, "delta_cos", [&](const EvalRecord& r) {
    const auto& base = mode == DeltaCosMode::query_baseline ? r.cos_before : r.cos_suffix;
    if (!r.cos_after || !base) throw InvalidArgument("delta_cos: record '" + r.query_id + "' lacks cosine fields");
    return *r.cos_after - *base;
  });
}

double mean_delta_rank(std::span<const EvalRecord> records) {
  return mean_of(records, "mean_delta_rank",
                 [](const EvalRecord& r) { return static_cast<double>(r.rank_before - r.rank_after); });
}

double mean_suffix_len(std::span<const EvalRecord> records) {
  return mean_of(records, "mean_suffix_len", [](const EvalRecord& r) { return static_cast<double>(r.suffix_len); });
}

double mean_iterations(std::span<const EvalRecord> records) {
  return mean_of(records, "mean_iterations", [](const EvalRecord& r) { return static_cast<double>(r.iterations); });
}

std::map<int, double> marginal_gain(const std::map<int, double>& m) {
  std::map<int, double> out;
  for (auto it = m.begin(); it != m.end(); ++it) {
    if (it == m.begin()) continue;
    auto prev = std::prev(it);
    if (prev->first != it->first - 1)
      throw InvalidArgument("marginal_gain: length " + std::to_string(it->first - 1) + " missing");
    out[it->first] = it->second - prev->second;
  }
  return out;
}

std::map<int, double> cumulative_success_curve(std::span<const std::optional<int>> first, int n_max) {
  if (first.empty()) throw InvalidArgument("cumulative_success_curve: no queries");
  std::map<int, double> out;
  for (int L = 1; L <= n_max; ++L) {
    const auto hits = std::count_if(first.begin(), first.end(), [&](const auto& f) { return f && *f <= L; });
    out[L] = static_cast<double>(hits) / static_cast<double>(first.size());
  }
  return out;
}

Complementarity complementarity_table(const std::map<std::string, bool>& suffix, const std::map<std::string, bool>& prefix) {
  if (suffix.size() != prefix.size()) throw InvalidArgument("complementarity: query sets differ");
  Complementarity c;
  for (const auto& [id, s] : suffix) {
    auto it = prefix.find(id);
    if (it == prefix.end()) throw InvalidArgument("complementarity: query '" + id + "' missing from prefix run");
    const bool p = it->second;
    if (s && p)
      ++c.both;
    else if (s)
      ++c.suffix_only;
    else if (p)
      ++c.prefix_only;
    else
      ++c.neither;
  }
  c.either = c.suffix_only + c.prefix_only + c.both;
  return c;
}

// --- detector ---------------------------------------------------------------

namespace {

double auroc(const std::vector<double>& s, const std::vector<bool>& pos) {
  const std::size_t n = s.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a] < s[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && s[idx[j + 1]] == s[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = avg;
    i = j + 1;
  }
  double r_pos = 0.0;
  double n_pos = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (pos[i]) {
      r_pos += rank[i];
      n_pos += 1.0;
    }
  const double n_neg = static_cast<double>(n) - n_pos;
  return (r_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double average_precision(const std::vector<double>& s, const std::vector<bool>& pos) {
  const std::size_t n = s.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  const double n_pos = static_cast<double>(std::count(pos.begin(), pos.end(), true));
  double tp = 0.0, fp = 0.0, prev_recall = 0.0, ap = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && s[idx[j]] == s[idx[i]]) {
      (pos[idx[j]] ? tp : fp) += 1.0;
      ++j;
    }
    const double recall = tp / n_pos;
    ap += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
    i = j;
  }
  return ap;
}

}  // namespace

DetectorReport detector_eval(std::span<const DetectorSample> samples, std::span<const double> target_fprs,
                             bool higher_is_adversarial) {
  std::vector<double> s;
  std::vector<bool> pos;
  for (const auto& x : samples) {
    if (!std::isfinite(x.score)) throw InvalidArgument("detector score is not finite");
    s.push_back(higher_is_adversarial ? x.score : -x.score);
    pos.push_back(x.adversarial);
  }
  const auto n_pos = std::count(pos.begin(), pos.end(), true);
  const auto n_neg = static_cast<std::ptrdiff_t>(pos.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw InvalidArgument("detector_eval needs both classes");

  std::vector<double> sorted = s;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  DetectorReport rep;
  for (double target : target_fprs) {
    if (target < 0.0 || target > 1.0) throw InvalidArgument("target FPR outside [0, 1]");
    auto fpr_at = [&](double th) {
      std::ptrdiff_t fp = 0;
      for (std::size_t i = 0; i < s.size(); ++i) fp += (!pos[i] && s[i] >= th) ? 1 : 0;
      return static_cast<double>(fp) / static_cast<double>(n_neg);
    };
    // FPR is non-increasing in the threshold, so the first qualifying
    // distinct score is the smallest.
    double th = std::nextafter(sorted.back(), std::numeric_limits<double>::infinity());
    for (double c : sorted)
      if (fpr_at(c) <= target) {
        th = c;
        break;
      }
    DetectorPoint p;
    p.target_fpr = target;
    p.threshold = higher_is_adversarial ? th : -th;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const bool flag = s[i] >= th;
      if (flag && pos[i]) ++p.tp;
      if (flag && !pos[i]) ++p.fp;
      if (!flag && pos[i]) ++p.fn;
      if (!flag && !pos[i]) ++p.tn;
    }
    p.actual_fpr = static_cast<double>(p.fp) / static_cast<double>(n_neg);
    p.recall = static_cast<double>(p.tp) / static_cast<double>(n_pos);
    p.precision = p.tp + p.fp > 0 ? static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fp) : 0.0;
    p.f1 = p.precision + p.recall > 0.0 ? 2.0 * p.precision * p.recall / (p.precision + p.recall) : 0.0;
    rep.points.push_back(p);
  }
  rep.auroc = auroc(s, pos);
  rep.auprc = average_precision(s, pos);
  return rep;
}

}  // namespace derag
