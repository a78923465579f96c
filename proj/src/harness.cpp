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

#include "derag/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace derag {

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

// --- workspace --------------------------------------------------------------

Workspace::Workspace(Corpus corpus, TokenTable table, std::vector<Query> queries, std::unique_ptr<Encoder> encoder)
    : corpus_(std::move(corpus)), table_(std::move(table)), queries_(std::move(queries)), encoder_(std::move(encoder)) {
  if (corpus_.empty()) throw InvalidArgument("corpus is empty");
  if (!encoder_) encoder_ = std::make_unique<SyntheticEncoder>(table_);
}

const DenseRetriever& Workspace::dense() {
  if (!dense_) {
    if (!corpus_.has_embeddings()) {
      std::vector<std::string> texts;
      for (const auto& d : corpus_.docs()) texts.push_back(d.text);
      const auto embs = encoder_->embed_batch(texts);
      Matf m(static_cast<Eigen::Index>(embs.size()), embs.empty() ? 0 : embs.front().size());
      for (std::size_t i = 0; i < embs.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = embs[i].transpose();
      corpus_.set_embeddings(std::move(m));
    }
    dense_.emplace(corpus_);
  }
  return *dense_;
}

const Bm25Retriever& Workspace::sparse() {
  if (!sparse_) sparse_.emplace(corpus_);
  return *sparse_;
}

EncoderKind parse_encoder_kind(std::string_view s) {
  if (s == "synthetic") return EncoderKind::synthetic;
  if (s == "http") return EncoderKind::http;
  throw InvalidArgument("unknown encoder '" + std::string(s) + "'");
}

std::unique_ptr<Workspace> load_workspace(const DataPaths& paths, const EncoderChoice& choice) {
  Corpus corpus = load_corpus(paths.corpus);
  if (paths.doc_emb) attach_embeddings(corpus, load_embedding_matrix(*paths.doc_emb));
  std::vector<Query> queries = load_queries(paths.queries);
  if (paths.query_emb) attach_embeddings(queries, load_embedding_matrix(*paths.query_emb));
  TokenTable table = load_token_table(paths.token_table);

  std::unique_ptr<Encoder> enc;
  if (choice.kind == EncoderKind::http) {
    std::string url = choice.url;
    if (url.empty())
      if (const char* env = std::getenv("DERAG_ENCODER_URL")) url = env;
    if (url.empty()) throw InvalidArgument("http encoder needs --encoder-url or DERAG_ENCODER_URL");
    auto http = std::make_unique<HttpEncoder>(EncoderEndpoint{url});
    const EncoderInfo info = http->info();
    if (info.dim != table.dim())
      throw ProtocolError("encoder dim " + std::to_string(info.dim) + " does not match token table dim " +
                          std::to_string(table.dim()));
    enc = std::move(http);
  }
  return std::make_unique<Workspace>(std::move(corpus), std::move(table), std::move(queries), std::move(enc));
}

std::size_t resolve_target(Workspace& ws, const Query& query, const AttackOptions& opts) {
  if (query.target_id) return ws.corpus().index_of(*query.target_id);
  if (opts.target_rank < 1)
    throw InvalidArgument("query '" + query.query_id + "' has no target_id and no --target-rank was given");
  Vecf scores;
  if (opts.retriever == RetrieverKind::dense) {
    SequenceEmbedder emb(ws.encoder(), ws.table());
    scores = ws.dense().scores(emb.embed_query(query));
  } else {
    scores = ws.sparse().scores(tokenize(query.text));
  }
  if (opts.target_rank > scores.size()) throw InvalidArgument("--target-rank exceeds corpus size");
  return top_k_indices(scores, opts.target_rank).back();
}

AttackResult run_attack(Workspace& ws, const Query& query, const AttackOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  AttackResult r;
  r.query_id = query.query_id;
  r.retriever = std::string(to_string(opts.retriever));
  r.variant = opts.de.variant;
  r.position = opts.de.position;
  r.loss = opts.loss;
  r.k = opts.k;

  const std::size_t target = resolve_target(ws, query, opts);
  r.target_id = ws.corpus()[target].doc_id;

  DEConfig de = opts.de;
  de.seed = derive_seed(opts.de.seed, {fnv1a(query.query_id)});

  SequenceEmbedder embedder(ws.encoder(), ws.table());
  try {
    ObjectiveConfig oc;
    oc.loss = opts.loss;
    oc.success = opts.success;
    oc.k = opts.k;

    std::vector<TokenId> pool_ids;
    if (opts.pool.mode == PoolMode::mlm)
      pool_ids = build_mlm_pool(query, opts.pool, ws.encoder(), ws.table()).token_ids;
    else
      pool_ids = build_full_pool(ws.table()).token_ids;
    const TokenProjector projector(ws.table(), std::move(pool_ids));

    std::unique_ptr<QueryScorer> scorer;
    if (opts.retriever == RetrieverKind::dense) {
      const DenseRetriever& dense = ws.dense();
      if (opts.pool.contrastive_n > 0)
        oc.scoring_subset = build_contrastive_pool(embedder.embed_query(query), dense,
                                                   static_cast<std::size_t>(opts.pool.contrastive_n));
      scorer = std::make_unique<DenseScorer>(dense, embedder, query, de.position);
    } else {
      scorer = std::make_unique<SparseScorer>(ws.sparse(), ws.table(), query, de.position);
    }

    Objective objective(*scorer, oc, target, de.seed);
    const CandidateScores& base = objective.baseline();
    r.rank_before = rank_of(base.doc_scores, target);

    const SearchResult sr = run_search(de, objective, projector);
    r.suffix_ids = sr.suffix;
    for (TokenId t : sr.suffix) r.suffix_surfaces.push_back(ws.table()[t].surface);
    r.suffix_len = static_cast<int>(sr.suffix.size());
    r.iterations_used = sr.evaluations;
    r.generations = sr.generations;
    r.stages_run = sr.stages_run;
    const int first_len = de.variant == Variant::fixed_stop || de.variant == Variant::random ? de.n_max : 1;
    for (std::size_t i = 0; i < sr.stage_success.size(); ++i)
      r.stage_success[first_len + static_cast<int>(i)] = sr.stage_success[i];
    r.success = sr.final.success;
    r.loss_final = sr.final.loss;

    const CandidateScores after = scorer->score(std::span<const TokenSeq>(&sr.suffix, 1)).at(0);
    r.rank_after = rank_of(after.doc_scores, target);
    for (int K : {1, 10, 20}) r.success_at[K] = r.rank_after <= K;
    if (opts.retriever == RetrieverKind::dense) {
      r.cos_before = base.doc_scores[static_cast<Eigen::Index>(target)];
      r.cos_after = after.doc_scores[static_cast<Eigen::Index>(target)];
      if (!sr.suffix.empty()) {
        const Vecf es = embedder.embed_suffix_only(sr.suffix);
        if (es.norm() > 0.0f) r.cos_suffix = ws.dense().score(es, target);
      }
    }
  } catch (const TransportError& e) {
    r.partial = true;
    r.error = e.what();
  } catch (const ProtocolError& e) {
    r.partial = true;
    r.error = e.what();
  }
  r.wall_time_ms = ms_since(t0);
  return r;
}

std::vector<AttackResult> run_attacks(Workspace& ws, const AttackOptions& opts, int jobs, std::ostream* progress) {
  opts.de.validate();
  opts.pool.validate();
  // Build shared state up front; workers only read it.
  if (opts.retriever == RetrieverKind::dense)
    ws.dense();
  else
    ws.sparse();

  const auto& qs = ws.queries();
  std::vector<std::optional<AttackResult>> slots(qs.size());
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  std::size_t done = 0;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= qs.size()) return;
      try {
        AttackResult r = run_attack(ws, qs[i], opts);
        std::lock_guard lock(mu);
        ++done;
        if (progress)
          *progress << "[" << done << "/" << qs.size() << "] " << r.query_id << " rank " << r.rank_before << " -> "
                    << r.rank_after << (r.partial ? " (partial: " + r.error + ")" : "") << "\n";
        slots[i] = std::move(r);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next = qs.size();
        return;
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(qs.size())));
  std::vector<std::thread> threads;
  for (int t = 1; t < n; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);

  std::vector<AttackResult> out;
  for (auto& s : slots) out.push_back(std::move(*s));
  std::stable_sort(out.begin(), out.end(),
                   [](const AttackResult& a, const AttackResult& b) { return a.query_id < b.query_id; });
  return out;
}

// --- ablation ---------------------------------------------------------------

std::vector<AblationRow> run_ablation(Workspace& ws, const AttackOptions& opts, const AblationGrid& grid, int jobs,
                                      std::ostream* progress) {
  const std::vector<int> lengths = grid.suffix_lengths.empty() ? std::vector<int>{0} : grid.suffix_lengths;
  const std::vector<int> pools = grid.pool_sizes.empty() ? std::vector<int>{0} : grid.pool_sizes;
  const std::vector<LossKind> losses = grid.losses.empty() ? std::vector<LossKind>{opts.loss} : grid.losses;

  std::vector<AblationRow> rows;
  for (LossKind loss : losses) {
    for (int pool : pools) {
      std::map<int, double> by_len;
      const std::size_t first_row = rows.size();
      for (int L : lengths) {
        AttackOptions o = opts;
        o.loss = loss;
        if (L > 0) {
          o.de.variant = Variant::fixed_stop;
          o.de.n_max = L;
        }
        if (pool > 0) {
          o.pool.mode = PoolMode::mlm;
          o.pool.pool_size = pool;
        }
        // Pool construction timed on its own, as a separate column.
        double build_ms = 0.0;
        if (o.pool.mode == PoolMode::mlm) {
          const auto t0 = std::chrono::steady_clock::now();
          for (const auto& q : ws.queries()) build_mlm_pool(q, o.pool, ws.encoder(), ws.table());
          build_ms = ms_since(t0);
        }
        const auto t1 = std::chrono::steady_clock::now();
        const auto results = run_attacks(ws, o, jobs, nullptr);
        const double total_ms = ms_since(t1);

        std::vector<EvalRecord> recs;
        for (const auto& r : results) recs.push_back(to_eval_record(r));
        AblationRow row;
        row.suffix_len = L > 0 ? L : o.de.n_max;
        row.pool_size = o.pool.mode == PoolMode::mlm ? o.pool.pool_size : static_cast<int>(ws.table().searchable().size());
        row.loss = loss;
        row.n = recs.size();
        row.success_at_1 = success_at_k(recs, 1);
        row.success_at_k = success_at_k(recs, o.k);
        row.delta_mrr = delta_mrr(recs);
        row.mean_delta_rank = mean_delta_rank(recs);
        row.mean_iterations = mean_iterations(recs);
        row.build_ms = build_ms / static_cast<double>(recs.size());
        row.query_ms = std::max(0.0, total_ms - build_ms) / static_cast<double>(recs.size());
        by_len[row.suffix_len] = row.mean_delta_rank;
        rows.push_back(row);
        if (progress)
          *progress << "ablate loss=" << to_string(loss) << " L=" << row.suffix_len << " pool=" << row.pool_size
                    << " success@1=" << row.success_at_1 << " mean_delta_rank=" << row.mean_delta_rank << "\n";
      }
      if (lengths.size() > 1) {
        std::map<int, double> consecutive;
        for (const auto& [L, v] : by_len) consecutive[L] = v;
        try {
          const auto gains = marginal_gain(consecutive);
          for (std::size_t i = first_row; i < rows.size(); ++i) {
            auto it = gains.find(rows[i].suffix_len);
            if (it != gains.end()) rows[i].marginal_gain = it->second;
          }
        } catch (const InvalidArgument&) {
          // Non-consecutive lengths: gain column left empty.
        }
      }
    }
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows, int k) {
  std::ostringstream out;
  out << "loss,suffix_len,pool_size,n,success_at_1,success_at_" << k
      << ",delta_mrr,mean_delta_rank,marginal_gain,mean_iterations,build_ms,query_ms\n";
  for (const auto& r : rows) {
    out << to_string(r.loss) << ',' << r.suffix_len << ',' << r.pool_size << ',' << r.n << ',' << fmt(r.success_at_1)
        << ',' << fmt(r.success_at_k) << ',' << fmt(r.delta_mrr) << ',' << fmt(r.mean_delta_rank) << ','
        << (r.marginal_gain ? fmt(*r.marginal_gain) : "") << ',' << fmt(r.mean_iterations) << ','
        << fmt(r.build_ms) << ',' << fmt(r.query_ms) << '\n';
  }
  return out.str();
}

// --- probe ------------------------------------------------------------------

std::string probe_surface_csv(const Vecd& q, const Vecd& d, const ProbeConfig& config, std::uint64_t seed, int plane) {
  if (plane != 2 && plane != 3) throw InvalidArgument("probe plane must be 2 or 3");
  Rng rng(seed);
  const Vecd d1 = estimate_d1<double>(q, d, config, rng);
  SurfaceGrid<double> g;
  if (plane == 2) {
    g = scan_surface<double>(q, d, d1, config, rng);
  } else {
    // d3 is a second Gram-Schmidt direction after d1 and d2.
    const Vecd basis1[] = {d1};
    const Vecd d2 = orthogonal_direction<double>(basis1, q.size(), rng);
    const Vecd basis2[] = {d1, d2};
    const Vecd d3 = orthogonal_direction<double>(basis2, q.size(), rng);
    g.d1 = d1;
    g.d2 = d3;
    g.axis = grid_axis<double>(config.grid);
    g.values.resize(config.grid, config.grid);
    for (int i = 0; i < config.grid; ++i)
      for (int j = 0; j < config.grid; ++j)
        g.values(i, j) = cosine_sim(q + g.axis[static_cast<std::size_t>(i)] * d1 + g.axis[static_cast<std::size_t>(j)] * d3, d);
  }
  std::string out = "alpha,beta,score\n";
  char buf[96];
  for (int i = 0; i < config.grid; ++i)
    for (int j = 0; j < config.grid; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", g.axis[static_cast<std::size_t>(i)],
                    g.axis[static_cast<std::size_t>(j)], g.values(i, j));
      out += buf;
    }
  return out;
}

SlopeRankResult slope_vs_rank_experiment(Workspace& ws, const AttackOptions& opts, const ProbeConfig& config, int jobs) {
  if (opts.retriever != RetrieverKind::dense) throw InvalidArgument("slope-vs-rank needs the dense retriever");
  AttackOptions o = opts;
  o.loss = LossKind::robust_hinge;
  const auto results = run_attacks(ws, o, jobs, nullptr);

  std::vector<SlopeRankPair> pairs;
  for (const auto& r : results) {
    const Query* q = nullptr;
    for (const auto& c : ws.queries())
      if (c.query_id == r.query_id) q = &c;
    SequenceEmbedder emb(ws.encoder(), ws.table());
    const Vecd qv = emb.embed_query(*q).cast<double>();
    const Vecd tv = ws.corpus().embedding(ws.corpus().index_of(r.target_id)).cast<double>();
    Rng rng(derive_seed(opts.de.seed, {fnv1a(r.query_id), 0x736c6f70ULL}));
    const double lambda = mean_local_slope<double>(qv, tv, config.eps_slope, config.n_pert, rng);
    pairs.push_back({r.query_id, lambda, static_cast<double>(r.rank_before - r.rank_after)});
  }
  return correlate_slope_rank(std::move(pairs));
}

std::string slope_pairs_csv(const SlopeRankResult& r) {
  std::string out = "query_id,lambda,delta_rank\n";
  char buf[64];
  for (const auto& p : r.pairs) {
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", p.lambda, p.delta_rank);
    out += p.query_id + buf;
  }
  return out;
}

}  // namespace derag
