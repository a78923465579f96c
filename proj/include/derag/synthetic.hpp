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
#include <vector>

#include "derag/data_ingest.hpp"
#include "derag/retrieval.hpp"

namespace derag {

/// Generated fixture: corpus, vocabulary and queries with target ids.
struct World {
  Corpus corpus;
  TokenTable table;
  std::vector<Query> queries;
};

/// Pronounceable, unique, lowercase alphanumeric word for index i.
std::string pseudo_word(std::size_t i);

/// Gaussian documents, queries and tokens in R^dim. Token rows have norm
/// about `token_scale`. Each query's target is the document at
/// `target_rank` under cosine similarity.
struct DenseWorldSpec {
  int n_docs = 1000;
  int dim = 32;
  int vocab = 256;
  int n_specials = 0;
  int n_queries = 100;
  int target_rank = 100;
  float token_scale = 0.5f;
  std::uint64_t seed = 1;
};

World make_dense_world(const DenseWorldSpec& spec);

/// Per query, a target sitting off-centre in a tight cluster of near
/// duplicates. The vocabulary holds, per cluster, long tokens along the
/// cluster centre and short tokens along the target's offset, plus random
/// filler. Moving towards the centre raises cos(query, target) fastest but
/// promotes the neighbours along with it.
struct ClusterWorldSpec {
  int n_docs = 1000;
  int dim = 32;
  int n_queries = 20;
  int n_neighbors = 10;
  float neighbor_spread = 0.05f;
  float target_offset = 0.35f;
  int generic_per_cluster = 4;
  int specific_per_cluster = 4;
  float generic_norm = 1.0f;
  float specific_norm = 0.25f;
  int filler_tokens = 64;
  float filler_norm = 0.5f;
  int target_rank = 100;
  std::uint64_t seed = 1;
};

World make_cluster_world(const ClusterWorldSpec& spec);

/// Bag-of-pseudo-words corpus. Document words are Zipf-distributed over
/// the vocabulary; every vocabulary word is also a token surface. Queries
/// are short word samples, and each target is the document at
/// `target_rank` under `rank_by`. With rank_by dense, documents are
/// embedded by SyntheticEncoder.
struct TextWorldSpec {
  int n_docs = 200;
  int vocab = 120;
  int min_doc_len = 12;
  int max_doc_len = 24;
  int query_len = 4;
  int n_queries = 50;
  int target_rank = 50;
  int dim = 8;
  int n_specials = 4;
  double zipf = 1.0;
  RetrieverKind rank_by = RetrieverKind::sparse;
  std::uint64_t seed = 1;
};

World make_text_world(const TextWorldSpec& spec);

/// Writes corpus.jsonl, queries.jsonl, tokens.bin (+ sidecar), and, when
/// present, doc_emb.bin and query_emb.bin (+ id sidecars) under `dir`.
void save_world(const std::filesystem::path& dir, const World& world);

}  // namespace derag
