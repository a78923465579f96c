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

#include "derag/de.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace derag {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::seq_stop:
      return "seq_stop";
    case Variant::fixed_stop:
      return "fixed_stop";
    case Variant::seq:
      return "seq";
    case Variant::random:
      return "random";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  if (s == "seq_stop") return Variant::seq_stop;
  if (s == "fixed_stop") return Variant::fixed_stop;
  if (s == "seq") return Variant::seq;
  if (s == "random") return Variant::random;
  throw InvalidArgument("unknown variant '" + std::string(s) + "'");
}

void DEConfig::validate() const {
  if (N < 4) throw InvalidArgument("population size must be >= 4");
  if (!(F > 0.0f)) throw InvalidArgument("F must be > 0");
  if (!(CR >= 0.0f && CR <= 1.0f)) throw InvalidArgument("CR must lie in [0, 1]");
  if (G < 1) throw InvalidArgument("G must be >= 1");
  if (T < 1) throw InvalidArgument("patience must be >= 1");
  if (n_max < 1) throw InvalidArgument("n_max must be >= 1");
}

double Individual::loss() const {
  if (!eval) throw InvalidArgument("individual has not been evaluated");
  return eval->loss;
}

std::size_t Population::best_index() const {
  if (members.empty()) throw InvalidArgument("empty population");
  std::size_t best = 0;
  for (std::size_t i = 1; i < members.size(); ++i)
    if (members[i].loss() < members[best].loss()) best = i;
  return best;
}

// --- projection -------------------------------------------------------------

TokenProjector::TokenProjector(const TokenTable& table, std::vector<TokenId> pool)
    : table_(&table), pool_(std::move(pool)) {
  if (pool_.empty()) throw InvalidArgument("token pool is empty");
  embeddings_.resize(static_cast<Eigen::Index>(pool_.size()), table.dim());
  for (std::size_t i = 0; i < pool_.size(); ++i) {
    if (pool_[i] >= table.size()) throw InvalidArgument("pool token id out of range");
    if (table.is_special(pool_[i])) throw InvalidArgument("pool contains special token '" + table[pool_[i]].surface + "'");
    embeddings_.row(static_cast<Eigen::Index>(i)) = table.embedding(pool_[i]).transpose();
  }
}

TokenId TokenProjector::nearest(const Vecf& m) const {
  if (m.size() != embeddings_.cols()) throw InvalidArgument("projection: dimension mismatch");
  const Vecf d2 = (embeddings_.rowwise() - m.transpose()).rowwise().squaredNorm();
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < d2.size(); ++i)
    if (d2[i] < d2[best]) best = i;
  return pool_[static_cast<std::size_t>(best)];
}

// --- operators --------------------------------------------------------------

Population init_population(const TokenSeq& base, int L, int N, const TokenProjector& pool, Rng& rng) {
  if (L < 0 || base.size() > static_cast<std::size_t>(L)) throw InvalidArgument("init_population: base longer than L");
  if (N < 1) throw InvalidArgument("init_population: N must be >= 1");
  Population pop;
  pop.members.assign(static_cast<std::size_t>(N), Individual{base, std::nullopt});
  const std::size_t P = pool.size();
  std::vector<std::size_t> perm(P);
  for (std::size_t d = base.size(); d < static_cast<std::size_t>(L); ++d) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = P; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
    for (std::size_t j = 0; j < pop.members.size(); ++j) {
      if (j > 0 && j % P == 0) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t i = P; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
      }
      pop.members[j].tokens.push_back(pool.pool()[perm[j % P]]);
    }
  }
  return pop;
}

std::array<std::size_t, 3> pick_parents(std::size_t i, std::size_t N, Rng& rng) {
  if (N < 4 || i >= N) throw InvalidArgument("pick_parents: need N >= 4 and i < N");
  std::array<std::size_t, 3> out{};
  for (std::size_t k = 0; k < 3; ++k) {
    std::size_t c;
    do {
      c = rng.index(N);
    } while (c == i || std::find(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(k), c) != out.begin() + static_cast<std::ptrdiff_t>(k));
    out[k] = c;
  }
  return out;
}

TokenSeq mutate_donor(const TokenSeq& a, const TokenSeq& b, const TokenSeq& c, float F,
                      const TokenProjector& projector) {
  if (a.size() != b.size() || a.size() != c.size()) throw InvalidArgument("mutate_donor: parent lengths differ");
  const TokenTable& table = projector.table();
  TokenSeq out(a.size());
  for (std::size_t d = 0; d < a.size(); ++d) {
    const Vecf m = donor_vector(table.embedding(a[d]), table.embedding(b[d]), table.embedding(c[d]), F);
    out[d] = projector.nearest(m);
  }
  return out;
}

CrossoverResult crossover(const TokenSeq& target, const TokenSeq& donor, float CR, Rng& rng) {
  if (target.size() != donor.size()) throw InvalidArgument("crossover: lengths differ");
  if (target.empty()) throw InvalidArgument("crossover: empty sequence");
  CrossoverResult out;
  out.forced = rng.index(target.size());
  out.trial.resize(target.size());
  out.from_donor.resize(target.size());
  for (std::size_t d = 0; d < target.size(); ++d) {
    const bool take = rng.uniform() < static_cast<double>(CR) || d == out.forced;
    out.from_donor[d] = take;
    out.trial[d] = take ? donor[d] : target[d];
  }
  return out;
}

const Individual& select(const Individual& target, const Individual& trial) {
  return trial.loss() <= target.loss() ? trial : target;
}

// --- stages -----------------------------------------------------------------

namespace {

void evaluate_all(std::vector<Individual>& inds, Objective& objective) {
  std::vector<TokenSeq> seqs;
  seqs.reserve(inds.size());
  for (const auto& ind : inds) seqs.push_back(ind.tokens);
  auto evals = objective.evaluate(seqs);
  for (std::size_t i = 0; i < inds.size(); ++i) inds[i].eval = evals[i];
}

}  // namespace

StageResult run_stage(const TokenSeq& base, int L, const DEConfig& config, Objective& objective,
                      const TokenProjector& projector, std::uint64_t stage_seed, bool stop_on_success) {
  config.validate();
  const std::size_t before = objective.evaluations();
  const auto N = static_cast<std::size_t>(config.N);

  Rng init_rng(derive_seed(stage_seed, {0xffffffffULL}));
  Population pop = init_population(base, L, config.N, projector, init_rng);
  evaluate_all(pop.members, objective);

  StageResult out;
  double best = std::numeric_limits<double>::infinity();
  int stagnant = 0;
  for (int g = 1; g <= config.G; ++g) {
    std::vector<Individual> trials(N);
    for (std::size_t i = 0; i < N; ++i) {
      Rng rng(derive_seed(stage_seed, {static_cast<std::uint64_t>(g), i}));
      const auto [a, b, c] = pick_parents(i, N, rng);
      const TokenSeq donor =
          mutate_donor(pop.members[a].tokens, pop.members[b].tokens, pop.members[c].tokens, config.F, projector);
      trials[i].tokens = crossover(pop.members[i].tokens, donor, config.CR, rng).trial;
    }
    evaluate_all(trials, objective);
    bool any_solved = false;
    for (std::size_t i = 0; i < N; ++i) {
      pop.members[i] = select(pop.members[i], trials[i]);
      any_solved = any_solved || objective.solved(*pop.members[i].eval);
    }
    pop.generation = g;

    const double l_min = pop.members[pop.best_index()].loss();
    pop.best_loss_history.push_back(l_min);
    if (l_min < best) {
      best = l_min;
      stagnant = 0;
    } else {
      ++stagnant;
    }
    out.generations = g;
    if ((stop_on_success && any_solved) || stagnant >= config.T) break;
  }

  // Prefer a solving member; otherwise the lowest loss.
  std::size_t pick = pop.best_index();
  for (std::size_t i = 0; i < N; ++i) {
    const bool s_i = objective.solved(*pop.members[i].eval);
    const bool s_pick = objective.solved(*pop.members[pick].eval);
    if (s_i && (!s_pick || pop.members[i].loss() < pop.members[pick].loss())) pick = i;
  }
  out.best = pop.members[pick];
  out.success = objective.solved(*out.best.eval);
  out.best_loss_history = std::move(pop.best_loss_history);
  out.evaluations = objective.evaluations() - before;
  return out;
}

namespace {

SearchResult random_search(const DEConfig& config, Objective& objective, const TokenProjector& projector) {
  SearchResult out;
  const std::size_t budget = config.random_budget();
  const auto batch = static_cast<std::size_t>(config.N);
  const auto L = static_cast<std::size_t>(config.n_max);
  std::optional<Individual> best;
  std::size_t used = 0;
  for (std::uint64_t round = 0; used < budget; ++round) {
    Rng rng(derive_seed(config.seed, {0x72616e64ULL, round}));
    std::vector<Individual> cands(std::min(batch, budget - used));
    for (auto& c : cands) {
      c.tokens.resize(L);
      for (auto& t : c.tokens) t = projector.pool()[rng.index(projector.size())];
    }
    evaluate_all(cands, objective);
    used += cands.size();
    bool done = false;
    for (auto& c : cands) {
      const bool better = !best || (objective.solved(*c.eval) && !objective.solved(*best->eval)) ||
                          (objective.solved(*c.eval) == objective.solved(*best->eval) && c.loss() < best->loss());
      if (better) best = c;
      done = done || objective.solved(*c.eval);
    }
    if (done) break;
  }
  out.suffix = best->tokens;
  out.final = *best->eval;
  out.evaluations = used;
  out.stages_run = 1;
  out.stage_success = {objective.solved(out.final)};
  return out;
}

}  // namespace

SearchResult run_search(const DEConfig& config, Objective& objective, const TokenProjector& projector) {
  config.validate();
  if (config.variant == Variant::random) return random_search(config, objective, projector);

  SearchResult out;
  const std::size_t before = objective.evaluations();
  const bool sequential = config.variant != Variant::fixed_stop;

  if (sequential) {
    const Evaluation empty = objective.judge(objective.baseline(), {});
    if (empty.target_rank <= objective.config().k) {
      out.final = empty;
      return out;
    }
  }

  const int first = sequential ? 1 : config.n_max;
  TokenSeq s_star;
  std::optional<std::pair<TokenSeq, Evaluation>> shortest_solved;
  for (int L = first; L <= config.n_max; ++L) {
    const StageResult st = run_stage(s_star, L, config, objective, projector,
                                     derive_seed(config.seed, {static_cast<std::uint64_t>(L)}),
                                     config.variant != Variant::seq);
    s_star = st.best.tokens;
    out.final = *st.best.eval;
    out.generations += st.generations;
    ++out.stages_run;
    out.stage_success.push_back(st.success);
    if (st.success && !shortest_solved) shortest_solved.emplace(s_star, out.final);
    if (st.success && config.variant == Variant::seq_stop) break;
  }
  out.suffix = s_star;
  if (config.variant == Variant::seq && shortest_solved) {
    out.suffix = shortest_solved->first;
    out.final = shortest_solved->second;
  }
  out.evaluations = objective.evaluations() - before;
  return out;
}

}  // namespace derag
