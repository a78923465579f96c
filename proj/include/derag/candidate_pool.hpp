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

#include <optional>
#include <span>
#include <vector>

#include "derag/encoder.hpp"
#include "derag/retrieval.hpp"
#include "derag/stats.hpp"

namespace derag {

enum class PoolMode { full, mlm };

std::string_view to_string(PoolMode m);
PoolMode parse_pool_mode(std::string_view s);

struct PoolSpec {
  PoolMode mode = PoolMode::full;
  int pool_size = 500;
  int tail_len = 5;
  int contrastive_n = 0;

  void validate() const;
};

struct CandidatePool {
  std::vector<TokenId> token_ids;
  /// Averaged fill-mask probability per entry (mlm mode only).
  std::optional<std::vector<float>> probs;
};

/// Every non-special token, ascending id.
CandidatePool build_full_pool(const TokenTable& table);

/// Indices of the n documents most cosine-similar to `query_embedding`.
std::vector<std::size_t> build_contrastive_pool(const Vecf& query_embedding, const DenseRetriever& retriever,
                                                std::size_t n);

/// Top pool_size non-special tokens by the service's tail-masked averaged
/// distribution. Asks for pool_size plus the number of specials so the
/// filtered list still fills the pool; ties go to the lower id.
CandidatePool build_mlm_pool(const Query& query, const PoolSpec& spec, Encoder& encoder, const TokenTable& table);

/// Mean masked-token NLL per text.
std::vector<float> suffix_nll(std::span<const std::string> texts, Encoder& encoder);

}  // namespace derag
