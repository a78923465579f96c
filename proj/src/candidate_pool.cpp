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

#include "derag/candidate_pool.hpp"

#include <algorithm>

namespace derag {

std::string_view to_string(PoolMode m) { return m == PoolMode::full ? "full" : "mlm"; }

PoolMode parse_pool_mode(std::string_view s) {
  if (s == "full") return PoolMode::full;
  if (s == "mlm") return PoolMode::mlm;
  throw InvalidArgument("unknown pool mode '" + std::string(s) + "'");
}

void PoolSpec::validate() const {
  if (pool_size < 1) throw InvalidArgument("pool_size must be >= 1");
  if (mode == PoolMode::mlm && tail_len < 1) throw InvalidArgument("tail_len must be >= 1 in mlm mode");
  if (contrastive_n < 0) throw InvalidArgument("contrastive_n must be >= 0");
}

CandidatePool build_full_pool(const TokenTable& table) {
  CandidatePool pool;
  pool.token_ids = table.searchable();
  if (pool.token_ids.empty()) throw DegenerateInput("token table has no searchable tokens");
  return pool;
}

std::vector<std::size_t> build_contrastive_pool(const Vecf& query_embedding, const DenseRetriever& retriever,
                                                std::size_t n) {
  if (n > retriever.size()) throw InvalidArgument("contrastive pool larger than the corpus");
  if (n == 0) return {};
  return top_k_indices(retriever.scores(query_embedding), static_cast<int>(n));
}

CandidatePool build_mlm_pool(const Query& query, const PoolSpec& spec, Encoder& encoder, const TokenTable& table) {
  spec.validate();
  std::size_t specials = 0;
  for (const auto& t : table.tokens()) specials += t.special ? 1 : 0;
  const int ask = spec.pool_size + static_cast<int>(specials);
  auto cands = encoder.mlm_fill(query.text, spec.tail_len, ask);

  std::erase_if(cands, [&](const MlmCandidate& c) { return c.token_id >= table.size() || table.is_special(c.token_id); });
  std::stable_sort(cands.begin(), cands.end(), [](const MlmCandidate& a, const MlmCandidate& b) {
    return a.prob > b.prob || (a.prob == b.prob && a.token_id < b.token_id);
  });
  if (cands.size() > static_cast<std::size_t>(spec.pool_size)) cands.resize(static_cast<std::size_t>(spec.pool_size));
  if (cands.empty()) throw DegenerateInput("mlm pool is empty for query '" + query.query_id + "'");

  CandidatePool pool;
  pool.probs.emplace();
  for (const auto& c : cands) {
    pool.token_ids.push_back(c.token_id);
    pool.probs->push_back(c.prob);
  }
  return pool;
}

std::vector<float> suffix_nll(std::span<const std::string> texts, Encoder& encoder) {
  if (texts.empty()) return {};
  std::vector<float> out;
  for (const auto& s : encoder.nll(texts)) out.push_back(s.nll);
  return out;
}

}  // namespace derag
