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

#include <array>
#include <optional>
#include <vector>

#include "derag/objective.hpp"
#include "derag/rng.hpp"

namespace derag {

enum class Variant { seq_stop, fixed_stop, seq, random };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);

struct DEConfig {
  int N = 24;
  float F = 0.5f;
  float CR = 0.5f;
  int G = 120;
  int T = 10;
  int n_max = 5;
  Position position = Position::suffix;
  Variant variant = Variant::seq_stop;
  std::uint64_t seed = 0;
  /// Evaluation budget for the random baseline; 0 means N * G.
  std::size_t budget = 0;

  void validate() const;
  std::size_t random_budget() const { return budget ? budget : static_cast<std::size_t>(N) * static_cast<std::size_t>(G); }
};

struct Individual {
  TokenSeq tokens;
  std::optional<Evaluation> eval;

  double loss() const;
};

struct Population {
  std::vector<Individual> members;
  int generation = 0;
  std::vector<double> best_loss_history;

  /// Index of the lowest-loss member, ties to the lowest index.
  std::size_t best_index() const;
};

/// m = a + F (b - c), elementwise.
template <typename DA, typename DB, typename DC>
typename DA::PlainObject donor_vector(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b,
                                      const Eigen::MatrixBase<DC>& c, typename DA::Scalar F) {
  if (a.size() != b.size() || a.size() != c.size()) throw InvalidArgument("donor_vector: dimension mismatch");
  return a + F * (b - c);
}

/// Exact L2 nearest-neighbour search over the token pool.
class TokenProjector {
 public:
  TokenProjector(const TokenTable& table, std::vector<TokenId> pool);

  /// Nearest pool token to `m`; ties go to the earlier pool entry.
  TokenId nearest(const Vecf& m) const;

  const TokenTable& table() const { return *table_; }
  const std::vector<TokenId>& pool() const { return pool_; }
  std::size_t size() const { return pool_.size(); }

 private:
  const TokenTable* table_;
  std::vector<TokenId> pool_;
  Matf embeddings_;
};

/// `base` right-padded to length L. Each padded position walks a fresh
/// random permutation of the pool, so every member's token there is
/// uniform on the pool and N >= |pool| covers the pool.
Population init_population(const TokenSeq& base, int L, int N, const TokenProjector& pool, Rng& rng);

/// Three distinct indices in [0, N) other than i, uniform without replacement.
std::array<std::size_t, 3> pick_parents(std::size_t i, std::size_t N, Rng& rng);

/// Per-position donor in embedding space, projected back to pool tokens.
TokenSeq mutate_donor(const TokenSeq& a, const TokenSeq& b, const TokenSeq& c, float F,
                      const TokenProjector& projector);

struct CrossoverResult {
  TokenSeq trial;
  std::vector<bool> from_donor;
  std::size_t forced = 0;  // d*
};

/// Binomial crossover. d* is drawn first, then one uniform per position.
CrossoverResult crossover(const TokenSeq& target, const TokenSeq& donor, float CR, Rng& rng);

/// Trial survives iff L(trial) <= L(target). Both must be evaluated.
const Individual& select(const Individual& target, const Individual& trial);

struct StageResult {
  Individual best;
  int generations = 0;
  std::size_t evaluations = 0;
  bool success = false;
  std::vector<double> best_loss_history;
};

/// One stage of length L seeded with `base`. Halts after G generations, on
/// T generations without improvement of the best loss, and, when
/// `stop_on_success`, as soon as any member solves the objective.
StageResult run_stage(const TokenSeq& base, int L, const DEConfig& config, Objective& objective,
                      const TokenProjector& projector, std::uint64_t stage_seed, bool stop_on_success = true);

struct SearchResult {
  TokenSeq suffix;
  Evaluation final;
  std::size_t evaluations = 0;
  int generations = 0;
  int stages_run = 0;
  /// Per executed stage (index L-1): did the stage's best solve the task.
  std::vector<bool> stage_success;
};

/// Runs the configured variant against `objective`.
SearchResult run_search(const DEConfig& config, Objective& objective, const TokenProjector& projector);

}  // namespace derag
