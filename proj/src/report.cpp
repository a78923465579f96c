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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "derag/harness.hpp"
#include "derag/stats.hpp"

namespace derag {

using nlohmann::ordered_json;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// label, retriever, variant, position, loss
using GroupKey = std::tuple<std::string, std::string, std::string, std::string, std::string>;

std::map<GroupKey, std::vector<const AttackResult*>> group(const std::vector<ReportInput>& inputs) {
  std::map<GroupKey, std::vector<const AttackResult*>> g;
  for (const auto& in : inputs)
    for (const auto& r : in.results)
      g[{in.label, r.retriever, std::string(to_string(r.variant)), std::string(to_string(r.position)),
         std::string(to_string(r.loss))}]
          .push_back(&r);
  return g;
}

std::vector<EvalRecord> records(const std::vector<const AttackResult*>& rs) {
  std::vector<EvalRecord> out;
  for (const auto* r : rs) out.push_back(to_eval_record(*r));
  return out;
}

bool all_have_cos(std::span<const EvalRecord> recs, DeltaCosMode mode) {
  for (const auto& e : recs) {
    if (!e.cos_after) return false;
    if (mode == DeltaCosMode::query_baseline && !e.cos_before) return false;
    if (mode == DeltaCosMode::paper_literal && !e.cos_suffix) return false;
  }
  return true;
}

bool hit(const AttackResult& r) { return r.rank_after <= r.k; }

double stddev(std::span<const double> x) { return x.size() < 2 ? 0.0 : std::sqrt(sample_variance(x)); }

}  // namespace

std::vector<DetectorSample> load_detector_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<DetectorSample> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError(path.string() + ": expected score,label", n);
    const std::string score = line.substr(0, comma);
    const std::string label = line.substr(comma + 1);
    DetectorSample s;
    try {
      std::size_t used = 0;
      s.score = std::stod(score, &used);
      if (used != score.size()) throw std::invalid_argument(score);
    } catch (const std::exception&) {
      if (n == 1) continue;  // header
      throw ParseError(path.string() + ": bad score '" + score + "'", n);
    }
    if (label == "adversarial" || label == "1")
      s.adversarial = true;
    else if (label == "clean" || label == "0")
      s.adversarial = false;
    else
      throw ParseError(path.string() + ": bad label '" + label + "'", n);
    out.push_back(s);
  }
  return out;
}

ReportTables build_report(const std::vector<ReportInput>& inputs, const ReportOptions& opts) {
  std::size_t total = 0;
  for (const auto& in : inputs) total += in.results.size();
  if (total == 0) throw InvalidArgument("report needs at least one result");

  ReportTables t;
  ordered_json j;
  j["schema"] = kResultSchema;
  j["delta_cos_mode"] = to_string(opts.delta_cos);

  const auto groups = group(inputs);

  // Main table, one row per (input, retriever, variant, position, loss).
  std::ostringstream main;
  main << "label,retriever,variant,position,loss,n,partial,succ_at_1,succ_at_10,succ_at_20,avg_tokens,avg_iterations,"
          "delta_mrr,delta_ndcg20,delta_cos\n";
  ordered_json jmain = ordered_json::array();
  for (const auto& [key, rs] : groups) {
    const auto& [label, retriever, variant, position, loss] = key;
    const auto recs = records(rs);
    const int partial = static_cast<int>(std::count_if(rs.begin(), rs.end(), [](auto* r) { return r->partial; }));
    const bool has_cos = all_have_cos(recs, opts.delta_cos);
    ordered_json row;
    row["label"] = label;
    row["retriever"] = retriever;
    row["variant"] = variant;
    row["position"] = position;
    row["loss"] = loss;
    row["n"] = recs.size();
    row["partial"] = partial;
    row["succ_at_1"] = success_at_k(recs, 1);
    row["succ_at_10"] = success_at_k(recs, 10);
    row["succ_at_20"] = success_at_k(recs, 20);
    row["avg_tokens"] = mean_suffix_len(recs);
    row["avg_iterations"] = mean_iterations(recs);
    row["delta_mrr"] = delta_mrr(recs);
    row["delta_ndcg20"] = delta_ndcg20(recs);
    if (has_cos)
      row["delta_cos"] = delta_cos(recs, opts.delta_cos);
    else
      row["delta_cos"] = nullptr;
    main << label << ',' << retriever << ',' << variant << ',' << position << ',' << loss << ',' << recs.size() << ','
         << partial << ',' << num(row["succ_at_1"]) << ',' << num(row["succ_at_10"]) << ','
         << num(row["succ_at_20"]) << ',' << num(row["avg_tokens"]) << ',' << num(row["avg_iterations"]) << ','
         << num(row["delta_mrr"]) << ',' << num(row["delta_ndcg20"]) << ','
         << (has_cos ? num(row["delta_cos"]) : "") << '\n';
    jmain.push_back(row);
  }
  t.main_csv = main.str();
  j["main"] = jmain;

  // Cumulative success by suffix length.
  std::ostringstream cum;
  cum << "label,retriever,variant,position,loss,suffix_len,cumulative_success\n";
  ordered_json jcum = ordered_json::array();
  for (const auto& [key, rs] : groups) {
    const auto& [label, retriever, variant, position, loss] = key;
    int n_max = 1;
    std::vector<std::optional<int>> first;
    for (const auto* r : rs) {
      for (const auto& [L, ok] : r->stage_success) n_max = std::max(n_max, L);
      first.push_back(first_success_len(*r));
    }
    for (const auto& [L, v] : cumulative_success_curve(first, n_max)) {
      cum << label << ',' << retriever << ',' << variant << ',' << position << ',' << loss << ',' << L << ','
          << num(v) << '\n';
      jcum.push_back({{"label", label}, {"retriever", retriever}, {"variant", variant}, {"position", position},
                      {"loss", loss}, {"suffix_len", L}, {"cumulative_success", v}});
    }
  }
  t.cumulative_csv = cum.str();
  j["cumulative"] = jcum;

  // Prefix/suffix complementarity, paired on (retriever, variant, loss) over
  // the query ids both runs share.
  std::ostringstream comp;
  comp << "retriever,variant,loss,suffix_only,prefix_only,both,neither,either,total\n";
  ordered_json jcomp = ordered_json::array();
  using PairKey = std::tuple<std::string, std::string, std::string>;
  std::map<PairKey, std::map<std::string, bool>> suffix_hits, prefix_hits;
  for (const auto& in : inputs)
    for (const auto& r : in.results) {
      PairKey pk{r.retriever, std::string(to_string(r.variant)), std::string(to_string(r.loss))};
      (r.position == Position::suffix ? suffix_hits : prefix_hits)[pk][r.query_id] = hit(r);
    }
  for (const auto& [pk, sfx] : suffix_hits) {
    auto it = prefix_hits.find(pk);
    if (it == prefix_hits.end()) continue;
    std::map<std::string, bool> s, p;
    for (const auto& [id, ok] : sfx)
      if (auto q = it->second.find(id); q != it->second.end()) {
        s[id] = ok;
        p[id] = q->second;
      }
    if (s.empty()) continue;
    const Complementarity c = complementarity_table(s, p);
    const auto& [retriever, variant, loss] = pk;
    comp << retriever << ',' << variant << ',' << loss << ',' << c.suffix_only << ',' << c.prefix_only << ','
         << c.both << ',' << c.neither << ',' << c.either << ',' << c.total() << '\n';
    jcomp.push_back({{"retriever", retriever}, {"variant", variant}, {"loss", loss}, {"suffix_only", c.suffix_only},
                     {"prefix_only", c.prefix_only}, {"both", c.both}, {"neither", c.neither},
                     {"either", c.either}, {"total", c.total()}});
  }
  t.complementarity_csv = comp.str();
  j["complementarity"] = jcomp;

  // Detector scores come from an external file.
  if (opts.detector_scores) {
    const auto samples = load_detector_samples(*opts.detector_scores);
    const DetectorReport d = detector_eval(samples, opts.detector_fprs, opts.higher_is_adversarial);
    std::ostringstream det;
    det << "target_fpr,threshold,actual_fpr,precision,recall,f1,tp,fp,tn,fn,auroc,auprc\n";
    ordered_json jd;
    jd["auroc"] = d.auroc;
    jd["auprc"] = d.auprc;
    jd["points"] = ordered_json::array();
    for (const auto& p : d.points) {
      det << num(p.target_fpr) << ',' << num(p.threshold) << ',' << num(p.actual_fpr) << ',' << num(p.precision)
          << ',' << num(p.recall) << ',' << num(p.f1) << ',' << p.tp << ',' << p.fp << ',' << p.tn << ',' << p.fn
          << ',' << num(d.auroc) << ',' << num(d.auprc) << '\n';
      jd["points"].push_back({{"target_fpr", p.target_fpr}, {"threshold", p.threshold},
                              {"actual_fpr", p.actual_fpr}, {"precision", p.precision}, {"recall", p.recall},
                              {"f1", p.f1}, {"tp", p.tp}, {"fp", p.fp}, {"tn", p.tn}, {"fn", p.fn}});
    }
    t.detector_csv = det.str();
    j["detector"] = jd;
  }

  // Suffix fluency per input; Welch's t compares each input with the first.
  if (opts.nll_encoder) {
    std::ostringstream rd;
    rd << "label,n,nll_mean,nll_std,ppl_mean,ppl_std,welch_t,welch_df,welch_p\n";
    ordered_json jr = ordered_json::array();
    std::vector<double> first_nll;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      std::vector<std::string> texts;
      for (const auto& r : inputs[i].results) {
        if (r.suffix_surfaces.empty()) continue;
        std::string s;
        for (const auto& w : r.suffix_surfaces) s += (s.empty() ? "" : " ") + w;
        texts.push_back(s);
      }
      std::vector<double> nll, ppl;
      if (!texts.empty())
        for (const auto& sc : opts.nll_encoder->nll(texts)) {
          nll.push_back(sc.nll);
          ppl.push_back(sc.ppl);
        }
      ordered_json row;
      row["label"] = inputs[i].label;
      row["n"] = nll.size();
      row["nll_mean"] = nll.empty() ? 0.0 : mean(nll);
      row["nll_std"] = stddev(nll);
      row["ppl_mean"] = ppl.empty() ? 0.0 : mean(ppl);
      row["ppl_std"] = stddev(ppl);
      std::string welch = ",,";
      if (i == 0) {
        first_nll = nll;
      } else if (first_nll.size() >= 2 && nll.size() >= 2) {
        try {
          const TTest w = welch_t(first_nll, nll);
          row["welch"] = {{"t", w.t}, {"df", w.df}, {"p", w.p}};
          welch = num(w.t) + ',' + num(w.df) + ',' + num(w.p);
        } catch (const DegenerateInput&) {
        }
      }
      rd << inputs[i].label << ',' << nll.size() << ',' << num(row["nll_mean"]) << ',' << num(row["nll_std"]) << ','
         << num(row["ppl_mean"]) << ',' << num(row["ppl_std"]) << ',' << welch << '\n';
      jr.push_back(row);
    }
    t.readability_csv = rd.str();
    j["readability"] = jr;
  }

  t.json = j.dump(2) + "\n";
  return t;
}

}  // namespace derag
