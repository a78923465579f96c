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

#include "derag/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "derag/encoder.hpp"
#include "derag/rng.hpp"

namespace derag {

namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";
const char* const kSpecials[] = {"[PAD]", "[CLS]", "[SEP]", "[MASK]", "[UNK]"};

std::string syllable(std::size_t i) {
  return {kConsonants[i % kConsonants.size()], kVowels[(i / kConsonants.size()) % kVowels.size()]};
}

Vecf unit(Vecf v) {
  const float n = v.norm();
  if (n == 0.0f) throw DegenerateInput("synthetic: zero vector");
  return v / n;
}

Vecf random_unit(Eigen::Index dim, Rng& rng) {
  for (;;) {
    Vecf v = rng.gaussian<float>(dim);
    if (v.norm() > 0.0f) return unit(std::move(v));
  }
}

Vecf orthogonal_unit(const Vecf& to, Rng& rng) {
  for (;;) {
    Vecf v = rng.gaussian<float>(to.size());
    v -= v.dot(to) * to;
    if (v.norm() > 1e-3f) return unit(std::move(v));
  }
}

/// Document at 1-based position `rank` of the descending score order.
// Document whose rank is exactly `rank`. When `rank` falls inside a group of
// tied scores, the first document ranked below that group is used instead.
std::size_t doc_at_rank(const Vecf& scores, int rank) {
  if (rank < 1 || rank > scores.size()) throw InvalidArgument("target rank outside the corpus");
  const auto order = top_k_indices(scores, static_cast<int>(scores.size()));
  for (auto i = static_cast<std::size_t>(rank - 1); i < order.size(); ++i)
    if (rank_of(scores, order[i]) >= rank) return order[i];
  return order[static_cast<std::size_t>(rank - 1)];
}

std::vector<Token> make_tokens(int n_specials, std::size_t n_plain, std::vector<std::string> plain_surfaces = {}) {
  if (n_specials < 0 || n_specials > static_cast<int>(std::size(kSpecials)))
    throw InvalidArgument("synthetic: at most 5 special tokens");
  std::vector<Token> toks;
  for (int i = 0; i < n_specials; ++i) toks.push_back({static_cast<TokenId>(i), kSpecials[i], true});
  for (std::size_t i = 0; i < n_plain; ++i) {
    std::string s = i < plain_surfaces.size() ? plain_surfaces[i] : "tok" + std::to_string(i);
    toks.push_back({static_cast<TokenId>(toks.size()), std::move(s), false});
  }
  return toks;
}

std::string doc_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "d%04zu", i);
  return buf;
}

std::string query_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "q%03zu", i);
  return buf;
}

}  // namespace

std::string pseudo_word(std::size_t i) {
  const std::size_t s = kConsonants.size() * kVowels.size();
  return syllable(i % s) + syllable((i / s) % s) + syllable(i / (s * s));
}

World make_dense_world(const DenseWorldSpec& spec) {
  if (spec.n_docs < 1 || spec.dim < 1 || spec.vocab < 1 || spec.n_queries < 1)
    throw InvalidArgument("dense world: sizes must be positive");
  Rng rng(derive_seed(spec.seed, {0x64656e7365ULL}));
  World w;
  std::vector<Document> docs;
  Matf demb(spec.n_docs, spec.dim);
  for (int i = 0; i < spec.n_docs; ++i) {
    docs.push_back(Document::from_text(doc_id(static_cast<std::size_t>(i)), "document " + std::to_string(i)));
    demb.row(i) = random_unit(spec.dim, rng).transpose();
  }
  w.corpus = Corpus(std::move(docs));
  w.corpus.set_embeddings(std::move(demb));

  const auto toks = make_tokens(spec.n_specials, static_cast<std::size_t>(spec.vocab));
  Matf temb(static_cast<Eigen::Index>(toks.size()), spec.dim);
  const float sd = spec.token_scale / std::sqrt(static_cast<float>(spec.dim));
  for (Eigen::Index i = 0; i < temb.rows(); ++i) temb.row(i) = rng.gaussian<float>(spec.dim, sd).transpose();
  w.table = TokenTable(toks, std::move(temb));

  DenseRetriever retr(w.corpus);
  for (int i = 0; i < spec.n_queries; ++i) {
    Query q;
    q.query_id = query_id(static_cast<std::size_t>(i));
    q.text = "query " + std::to_string(i);
    q.embedding = random_unit(spec.dim, rng);
    q.target_id = w.corpus[doc_at_rank(retr.scores(*q.embedding), spec.target_rank)].doc_id;
    w.queries.push_back(std::move(q));
  }
  return w;
}

World make_cluster_world(const ClusterWorldSpec& spec) {
  const int cluster_docs = spec.n_queries * (1 + spec.n_neighbors);
  if (spec.n_queries < 1 || cluster_docs > spec.n_docs) throw InvalidArgument("cluster world: clusters exceed corpus");
  Rng rng(derive_seed(spec.seed, {0x636c7573ULL}));
  const Eigen::Index d = spec.dim;

  std::vector<Vecf> centers, offsets;
  Matf demb(spec.n_docs, d);
  std::vector<Document> docs;
  std::vector<std::size_t> targets;
  int row = 0;
  auto add_doc = [&](const Vecf& v) {
    docs.push_back(Document::from_text(doc_id(static_cast<std::size_t>(row)), "document " + std::to_string(row)));
    demb.row(row++) = v.transpose();
  };
  for (int c = 0; c < spec.n_queries; ++c) {
    const Vecf center = random_unit(d, rng);
    const Vecf offset = orthogonal_unit(center, rng);
    centers.push_back(center);
    offsets.push_back(offset);
    targets.push_back(static_cast<std::size_t>(row));
    add_doc(unit(center + spec.target_offset * offset));
    for (int n = 0; n < spec.n_neighbors; ++n) {
      Vecf g = rng.gaussian<float>(d, 1.0f / std::sqrt(static_cast<float>(d)));
      g -= g.dot(offset) * offset;
      add_doc(unit(center + spec.neighbor_spread * g));
    }
  }
  while (row < spec.n_docs) add_doc(random_unit(d, rng));

  // Shuffle so clusters do not occupy a block of low indices.
  std::vector<std::size_t> perm(static_cast<std::size_t>(spec.n_docs));
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
  std::vector<std::size_t> where(perm.size());
  Matf shuffled(spec.n_docs, d);
  std::vector<Document> sdocs;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    shuffled.row(static_cast<Eigen::Index>(i)) = demb.row(static_cast<Eigen::Index>(perm[i]));
    sdocs.push_back(Document::from_text(doc_id(i), "document " + std::to_string(i)));
    where[perm[i]] = i;
  }

  World w;
  w.corpus = Corpus(std::move(sdocs));
  w.corpus.set_embeddings(std::move(shuffled));

  std::vector<Vecf> rows;
  for (int c = 0; c < spec.n_queries; ++c) {
    for (int g = 0; g < spec.generic_per_cluster; ++g)
      rows.push_back(spec.generic_norm * unit(centers[c] + 0.02f * random_unit(d, rng)));
    for (int s = 0; s < spec.specific_per_cluster; ++s)
      rows.push_back(spec.specific_norm * unit(offsets[c] + 0.02f * random_unit(d, rng)));
  }
  for (int f = 0; f < spec.filler_tokens; ++f) rows.push_back(spec.filler_norm * random_unit(d, rng));
  // Interleave so token ids carry no cluster structure.
  for (std::size_t i = rows.size(); i > 1; --i) std::swap(rows[i - 1], rows[rng.index(i)]);
  Matf temb(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i) temb.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  w.table = TokenTable(make_tokens(0, rows.size()), std::move(temb));

  DenseRetriever retr(w.corpus);
  for (int c = 0; c < spec.n_queries; ++c) {
    const std::size_t t = where[targets[static_cast<std::size_t>(c)]];
    const Vecf tv = w.corpus.embedding(t);
    const Vecf r = orthogonal_unit(tv, rng);
    // Bisection on the mixing weight; rank falls as the weight grows.
    float lo = -1.0f, hi = 1.0f;
    for (int it = 0; it < 40; ++it) {
      const float a = 0.5f * (lo + hi);
      const Vecf q = a * tv + std::sqrt(std::max(0.0f, 1.0f - a * a)) * r;
      if (rank_of(retr.scores(q), t) > spec.target_rank)
        lo = a;
      else
        hi = a;
    }
    Query q;
    q.query_id = query_id(static_cast<std::size_t>(c));
    q.text = "query " + std::to_string(c);
    q.embedding = hi * tv + std::sqrt(std::max(0.0f, 1.0f - hi * hi)) * r;
    q.target_id = w.corpus[t].doc_id;
    w.queries.push_back(std::move(q));
  }
  return w;
}

World make_text_world(const TextWorldSpec& spec) {
  if (spec.n_docs < 1 || spec.vocab < 1 || spec.min_doc_len < 1 || spec.max_doc_len < spec.min_doc_len ||
      spec.query_len < 1 || spec.n_queries < 1)
    throw InvalidArgument("text world: bad sizes");
  Rng rng(derive_seed(spec.seed, {0x74657874ULL}));
  std::vector<std::string> words;
  for (int i = 0; i < spec.vocab; ++i) words.push_back(pseudo_word(static_cast<std::size_t>(i)));

  // Zipf CDF over a random rank order of the vocabulary.
  std::vector<std::size_t> order(words.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  std::vector<double> cdf(words.size());
  double acc = 0.0;
  for (std::size_t r = 0; r < words.size(); ++r) {
    acc += 1.0 / std::pow(static_cast<double>(r + 1), spec.zipf);
    cdf[r] = acc;
  }
  auto draw = [&] {
    const double u = rng.uniform() * acc;
    const auto r = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    return words[order[std::min(r, order.size() - 1)]];
  };

  World w;
  std::vector<Document> docs;
  for (int i = 0; i < spec.n_docs; ++i) {
    const int len = spec.min_doc_len + static_cast<int>(rng.index(static_cast<std::size_t>(spec.max_doc_len - spec.min_doc_len + 1)));
    std::string text;
    for (int k = 0; k < len; ++k) text += (k ? " " : "") + draw();
    docs.push_back(Document::from_text(doc_id(static_cast<std::size_t>(i)), std::move(text)));
  }
  w.corpus = Corpus(std::move(docs));

  const auto toks = make_tokens(spec.n_specials, words.size(), words);
  Matf temb(static_cast<Eigen::Index>(toks.size()), spec.dim);
  for (Eigen::Index i = 0; i < temb.rows(); ++i)
    temb.row(i) = rng.gaussian<float>(spec.dim, 1.0f / std::sqrt(static_cast<float>(spec.dim))).transpose();
  w.table = TokenTable(toks, std::move(temb));

  for (int i = 0; i < spec.n_queries; ++i) {
    Query q;
    q.query_id = query_id(static_cast<std::size_t>(i));
    for (int k = 0; k < spec.query_len; ++k) q.text += (k ? " " : "") + draw();
    w.queries.push_back(std::move(q));
  }

  if (spec.rank_by == RetrieverKind::sparse) {
    Bm25Retriever bm25(w.corpus);
    for (auto& q : w.queries) q.target_id = w.corpus[doc_at_rank(bm25.scores(tokenize(q.text)), spec.target_rank)].doc_id;
  } else {
    SyntheticEncoder enc(w.table);
    std::vector<std::string> texts;
    for (const auto& d : w.corpus.docs()) texts.push_back(d.text);
    const auto embs = enc.embed_batch(texts);
    Matf demb(static_cast<Eigen::Index>(embs.size()), spec.dim);
    for (std::size_t i = 0; i < embs.size(); ++i) demb.row(static_cast<Eigen::Index>(i)) = embs[i].transpose();
    w.corpus.set_embeddings(std::move(demb));
    DenseRetriever dense(w.corpus);
    for (auto& q : w.queries)
      q.target_id = w.corpus[doc_at_rank(dense.scores(enc.embed_query(q)), spec.target_rank)].doc_id;
  }
  return w;
}

void save_world(const std::filesystem::path& dir, const World& world) {
  std::filesystem::create_directories(dir);
  write_corpus(dir / "corpus.jsonl", world.corpus);
  write_queries(dir / "queries.jsonl", world.queries);
  write_token_table(dir / "tokens.bin", world.table);
  if (world.corpus.has_embeddings()) {
    EmbeddingMatrix m{world.corpus.embeddings(), {}};
    for (const auto& d : world.corpus.docs()) m.ids.push_back(d.doc_id);
    write_embedding_matrix(dir / "doc_emb.bin", m);
  }
  const bool all_embedded = std::all_of(world.queries.begin(), world.queries.end(), [](const Query& q) { return q.embedding.has_value(); });
  if (!world.queries.empty() && all_embedded) {
    EmbeddingMatrix m;
    m.values.resize(static_cast<Eigen::Index>(world.queries.size()), world.queries.front().embedding->size());
    for (std::size_t i = 0; i < world.queries.size(); ++i) {
      m.values.row(static_cast<Eigen::Index>(i)) = world.queries[i].embedding->transpose();
      m.ids.push_back(world.queries[i].query_id);
    }
    write_embedding_matrix(dir / "query_emb.bin", m);
  }
}

}  // namespace derag
