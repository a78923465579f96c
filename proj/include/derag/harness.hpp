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

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "derag/candidate_pool.hpp"
#include "derag/de.hpp"
#include "derag/geometry.hpp"
#include "derag/results.hpp"

namespace derag {

inline constexpr const char* kToolVersion = "0.1.0";

struct AttackOptions {
  RetrieverKind retriever = RetrieverKind::dense;
  DEConfig de;
  LossKind loss = LossKind::hinge;
  SuccessMode success = SuccessMode::literal;
  int k = 10;
  PoolSpec pool;
  /// Used when a query carries no target id: the document at this rank
  /// under the bare query becomes the target. 0 requires explicit targets.
  int target_rank = 0;
};

/// Everything an attack reads. Retrievers are built on demand. A null
/// encoder selects SyntheticEncoder over the workspace's own table.
class Workspace {
 public:
  Workspace(Corpus corpus, TokenTable table, std::vector<Query> queries, std::unique_ptr<Encoder> encoder = nullptr);
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;

  const Corpus& corpus() const { return corpus_; }
  const TokenTable& table() const { return table_; }
  const std::vector<Query>& queries() const { return queries_; }
  Encoder& encoder() { return *encoder_; }

  /// Embeds documents through the encoder when the corpus has none.
  const DenseRetriever& dense();
  const Bm25Retriever& sparse();

 private:
  Corpus corpus_;
  TokenTable table_;
  std::vector<Query> queries_;
  std::unique_ptr<Encoder> encoder_;
  std::optional<DenseRetriever> dense_;
  std::optional<Bm25Retriever> sparse_;
};

struct DataPaths {
  std::filesystem::path corpus;
  std::filesystem::path queries;
  std::filesystem::path token_table;
  std::optional<std::filesystem::path> doc_emb;
  std::optional<std::filesystem::path> query_emb;
};

enum class EncoderKind { synthetic, http };
EncoderKind parse_encoder_kind(std::string_view s);

struct EncoderChoice {
  EncoderKind kind = EncoderKind::synthetic;
  /// Falls back to DERAG_ENCODER_URL when empty.
  std::string url;
};

std::unique_ptr<Workspace> load_workspace(const DataPaths& paths, const EncoderChoice& encoder);

/// Target index for `query` under `opts` (explicit id or planted rank).
std::size_t resolve_target(Workspace& ws, const Query& query, const AttackOptions& opts);

/// One attack. Transport and protocol failures come back as a partial
/// result with `error` set; other errors propagate.
AttackResult run_attack(Workspace& ws, const Query& query, const AttackOptions& opts);

/// All queries over `jobs` worker threads, sorted by query id.
std::vector<AttackResult> run_attacks(Workspace& ws, const AttackOptions& opts, int jobs = 1,
                                      std::ostream* progress = nullptr);

// --- ablation ---------------------------------------------------------------

struct AblationGrid {
  std::vector<int> suffix_lengths;  // fixed_stop at each length; empty keeps opts
  std::vector<int> pool_sizes;      // mlm pool sizes; empty keeps opts
  std::vector<LossKind> losses;     // empty keeps opts
};

struct AblationRow {
  int suffix_len = 0;
  int pool_size = 0;
  LossKind loss = LossKind::hinge;
  std::size_t n = 0;
  double success_at_1 = 0.0;
  double success_at_k = 0.0;
  double delta_mrr = 0.0;
  double mean_delta_rank = 0.0;
  std::optional<double> marginal_gain;
  double mean_iterations = 0.0;
  double build_ms = 0.0;
  double query_ms = 0.0;
};

std::vector<AblationRow> run_ablation(Workspace& ws, const AttackOptions& opts, const AblationGrid& grid, int jobs = 1,
                                      std::ostream* progress = nullptr);
std::string ablation_csv(const std::vector<AblationRow>& rows, int k);

// --- geometry probe ---------------------------------------------------------

/// f(alpha, beta) rows as CSV with header alpha,beta,score. `plane` is 2
/// for (d1, d2) and 3 for (d1, d3).
std::string probe_surface_csv(const Vecd& q, const Vecd& d, const ProbeConfig& config, std::uint64_t seed, int plane = 2);

/// Robust-hinge attack per query paired with its mean local slope.
SlopeRankResult slope_vs_rank_experiment(Workspace& ws, const AttackOptions& opts, const ProbeConfig& config,
                                         int jobs = 1);
std::string slope_pairs_csv(const SlopeRankResult& r);

// --- report -----------------------------------------------------------------

struct ReportInput {
  std::string label;
  std::vector<AttackResult> results;
};

struct ReportOptions {
  DeltaCosMode delta_cos = DeltaCosMode::query_baseline;
  std::vector<double> detector_fprs = {0.01, 0.05, 0.10};
  bool higher_is_adversarial = true;
  std::optional<std::filesystem::path> detector_scores;
  /// When set, suffix fluency (NLL/PPL) is scored through this encoder.
  Encoder* nll_encoder = nullptr;
};

struct ReportTables {
  std::string main_csv;
  std::string cumulative_csv;
  std::string complementarity_csv;
  std::string detector_csv;
  std::string readability_csv;
  std::string json;
};

ReportTables build_report(const std::vector<ReportInput>& inputs, const ReportOptions& opts);

/// Detector samples from CSV lines "score,label" with label adversarial|clean
/// or 1|0; a header line is skipped.
std::vector<DetectorSample> load_detector_samples(const std::filesystem::path& path);

}  // namespace derag
