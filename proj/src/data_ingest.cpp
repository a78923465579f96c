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

#include "derag/data_ingest.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace derag {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::array<char, 4> kMagic = {'D', 'E', 'R', 'G'};
constexpr std::size_t kHeaderBytes = 16;

std::uint32_t load_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_u32(unsigned char* p, std::uint32_t v) {
  p[0] = static_cast<unsigned char>(v);
  p[1] = static_cast<unsigned char>(v >> 8);
  p[2] = static_cast<unsigned char>(v >> 16);
  p[3] = static_cast<unsigned char>(v >> 24);
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

// Parses one JSONL line; blank lines are skipped by callers.
json parse_line(const std::string& line, std::size_t lineno, const fs::path& path) {
  try {
    json j = json::parse(line);
    if (!j.is_object()) throw ParseError(path.string() + ": expected a JSON object", lineno);
    return j;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), lineno);
  }
}

template <typename T>
T require(const json& j, const char* key, std::size_t lineno, const fs::path& path) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(path.string() + ": missing field '" + key + "'", lineno);
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ParseError(path.string() + ": field '" + key + "' has the wrong type", lineno);
  }
}

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::vector<std::string> read_id_sidecar(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    json j = parse_line(line, lineno, path);
    auto row = require<std::uint64_t>(j, "row", lineno, path);
    if (row != ids.size()) throw ParseError(path.string() + ": rows must be listed in order", lineno);
    ids.push_back(require<std::string>(j, "id", lineno, path));
  }
  return ids;
}

}  // namespace

// --- Corpus ---------------------------------------------------------------

Corpus::Corpus(std::vector<Document> docs) : docs_(std::move(docs)) {
  long total = 0;
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    if (!by_id_.emplace(docs_[i].doc_id, i).second)
      throw InvalidArgument("duplicate doc_id '" + docs_[i].doc_id + "'");
    total += docs_[i].length;
  }
  avg_doc_len_ = docs_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs_.size());
}

std::optional<std::size_t> Corpus::find(std::string_view doc_id) const {
  auto it = by_id_.find(std::string(doc_id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::size_t Corpus::index_of(std::string_view doc_id) const {
  if (auto i = find(doc_id)) return *i;
  throw InvalidArgument("unknown doc_id '" + std::string(doc_id) + "'");
}

void Corpus::set_embeddings(Matf embeddings) {
  if (static_cast<std::size_t>(embeddings.rows()) != docs_.size())
    throw InvalidArgument("embedding rows (" + std::to_string(embeddings.rows()) +
                          ") do not match corpus size (" + std::to_string(docs_.size()) + ")");
  if (embeddings.cols() == 0) throw InvalidArgument("embedding dimension is 0");
  dim_ = embeddings.cols();
  embeddings_ = std::move(embeddings);
  has_embeddings_ = true;
}

// --- TokenTable -----------------------------------------------------------

TokenTable::TokenTable(std::vector<Token> tokens, Matf embeddings)
    : tokens_(std::move(tokens)), embeddings_(std::move(embeddings)) {
  if (static_cast<std::size_t>(embeddings_.rows()) != tokens_.size())
    throw InvalidArgument("token table rows do not match token count");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].token_id != i)
      throw InvalidArgument("token ids must be dense: row " + std::to_string(i) + " has id " +
                            std::to_string(tokens_[i].token_id));
    by_surface_.emplace(tokens_[i].surface, static_cast<TokenId>(i));
  }
}

void TokenTable::mark_special(std::span<const std::string> surfaces) {
  for (const auto& s : surfaces)
    if (auto id = find(s)) tokens_[*id].special = true;
}

std::vector<TokenId> TokenTable::searchable() const {
  std::vector<TokenId> ids;
  ids.reserve(tokens_.size());
  for (const auto& t : tokens_)
    if (!t.special) ids.push_back(t.token_id);
  return ids;
}

std::optional<TokenId> TokenTable::find(std::string_view surface) const {
  auto it = by_surface_.find(std::string(surface));
  if (it == by_surface_.end()) return std::nullopt;
  return it->second;
}

// --- binary matrices ------------------------------------------------------

Matf read_matrix_bin(const fs::path& path) {
  auto in = open_in(path, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kHeaderBytes) throw FormatError(path.string() + ": truncated header");
  if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0)
    throw FormatError(path.string() + ": bad magic");
  const std::uint32_t version = load_u32(bytes.data() + 4);
  const std::uint32_t rows = load_u32(bytes.data() + 8);
  const std::uint32_t dim = load_u32(bytes.data() + 12);
  if (version != kFormatVersion)
    throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
  if (dim == 0) throw FormatError(path.string() + ": dimension is 0");
  const std::size_t payload = static_cast<std::size_t>(rows) * dim * sizeof(float);
  if (bytes.size() - kHeaderBytes < payload)
    throw FormatError(path.string() + ": truncated payload (expected " + std::to_string(payload) +
                      " bytes, found " + std::to_string(bytes.size() - kHeaderBytes) + ")");
  if (bytes.size() - kHeaderBytes > payload) throw FormatError(path.string() + ": trailing bytes");

  Matf m(rows, dim);
  const unsigned char* p = bytes.data() + kHeaderBytes;
  for (Eigen::Index i = 0; i < m.size(); ++i, p += 4) {
    const std::uint32_t bits = load_u32(p);
    m.data()[i] = std::bit_cast<float>(bits);
  }
  return m;
}

void write_matrix_bin(const fs::path& path, const Matf& m) {
  std::vector<unsigned char> bytes(kHeaderBytes + static_cast<std::size_t>(m.size()) * 4);
  std::memcpy(bytes.data(), kMagic.data(), kMagic.size());
  store_u32(bytes.data() + 4, kFormatVersion);
  store_u32(bytes.data() + 8, static_cast<std::uint32_t>(m.rows()));
  store_u32(bytes.data() + 12, static_cast<std::uint32_t>(m.cols()));
  unsigned char* p = bytes.data() + kHeaderBytes;
  for (Eigen::Index i = 0; i < m.size(); ++i, p += 4) store_u32(p, std::bit_cast<std::uint32_t>(m.data()[i]));
  auto out = open_out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

namespace {

fs::path swap_bin_extension(const fs::path& p, const std::string& ext) {
  fs::path out = p;
  if (out.extension() == ".bin") out.replace_extension();
  out += ext;
  return out;
}

}  // namespace

fs::path ids_sidecar(const fs::path& matrix_path) { return swap_bin_extension(matrix_path, ".ids.jsonl"); }
fs::path tokens_sidecar(const fs::path& matrix_path) { return swap_bin_extension(matrix_path, ".tokens.jsonl"); }

EmbeddingMatrix load_embedding_matrix(const fs::path& path, std::optional<fs::path> sidecar) {
  const fs::path side = sidecar.value_or(ids_sidecar(path));
  if (!fs::exists(side)) throw FormatError("missing id sidecar '" + side.string() + "'");
  EmbeddingMatrix m{read_matrix_bin(path), read_id_sidecar(side)};
  if (m.ids.size() != static_cast<std::size_t>(m.values.rows()))
    throw FormatError(path.string() + ": sidecar lists " + std::to_string(m.ids.size()) + " ids for " +
                      std::to_string(m.values.rows()) + " rows");
  return m;
}

void write_embedding_matrix(const fs::path& path, const EmbeddingMatrix& m, std::optional<fs::path> sidecar) {
  if (m.ids.size() != static_cast<std::size_t>(m.values.rows()))
    throw InvalidArgument("id count does not match matrix rows");
  write_matrix_bin(path, m.values);
  auto out = open_out(sidecar.value_or(ids_sidecar(path)));
  for (std::size_t i = 0; i < m.ids.size(); ++i) {
    ordered_json j;
    j["row"] = i;
    j["id"] = m.ids[i];
    out << j.dump() << '\n';
  }
}

TokenTable load_token_table(const fs::path& path, std::optional<fs::path> sidecar,
                            std::span<const std::string> extra_specials) {
  const fs::path side = sidecar.value_or(tokens_sidecar(path));
  if (!fs::exists(side)) throw FormatError("missing token sidecar '" + side.string() + "'");
  Matf emb = read_matrix_bin(path);

  auto in = open_in(side);
  std::vector<Token> tokens;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    json j = parse_line(line, lineno, side);
    Token t;
    t.token_id = require<TokenId>(j, "token_id", lineno, side);
    t.surface = require<std::string>(j, "surface", lineno, side);
    t.special = j.value("special", false);
    if (t.token_id != tokens.size())
      throw ParseError(side.string() + ": token ids must be dense and in row order", lineno);
    tokens.push_back(std::move(t));
  }
  if (tokens.size() != static_cast<std::size_t>(emb.rows()))
    throw FormatError(side.string() + ": " + std::to_string(tokens.size()) + " tokens for " +
                      std::to_string(emb.rows()) + " embedding rows");
  TokenTable table(std::move(tokens), std::move(emb));
  table.mark_special(extra_specials);
  return table;
}

void write_token_table(const fs::path& path, const TokenTable& table, std::optional<fs::path> sidecar) {
  write_matrix_bin(path, table.embeddings());
  auto out = open_out(sidecar.value_or(tokens_sidecar(path)));
  for (const auto& t : table.tokens()) {
    ordered_json j;
    j["token_id"] = t.token_id;
    j["surface"] = t.surface;
    j["special"] = t.special;
    out << j.dump() << '\n';
  }
}

// --- JSONL corpora and queries -------------------------------------------

Corpus load_corpus(const fs::path& path) {
  auto in = open_in(path);
  std::vector<Document> docs;
  std::unordered_map<std::string, std::size_t> first_line;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    json j = parse_line(line, lineno, path);
    auto id = require<std::string>(j, "doc_id", lineno, path);
    auto text = require<std::string>(j, "text", lineno, path);
    if (auto [it, fresh] = first_line.emplace(id, lineno); !fresh)
      throw ParseError(path.string() + ": duplicate doc_id '" + id + "' (first seen on line " +
                           std::to_string(it->second) + ")",
                       lineno);
    docs.push_back(Document::from_text(std::move(id), std::move(text)));
  }
  return Corpus(std::move(docs));
}

void write_corpus(const fs::path& path, const Corpus& corpus) {
  auto out = open_out(path);
  for (const auto& d : corpus.docs()) {
    ordered_json j;
    j["doc_id"] = d.doc_id;
    j["text"] = d.text;
    out << j.dump() << '\n';
  }
}

std::vector<Query> load_queries(const fs::path& path) {
  auto in = open_in(path);
  std::vector<Query> queries;
  std::unordered_map<std::string, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    json j = parse_line(line, lineno, path);
    Query q;
    q.query_id = require<std::string>(j, "query_id", lineno, path);
    q.text = require<std::string>(j, "text", lineno, path);
    if (auto it = j.find("target_id"); it != j.end() && !it->is_null()) q.target_id = it->get<std::string>();
    if (!seen.emplace(q.query_id, lineno).second)
      throw ParseError(path.string() + ": duplicate query_id '" + q.query_id + "'", lineno);
    queries.push_back(std::move(q));
  }
  return queries;
}

void write_queries(const fs::path& path, std::span<const Query> queries) {
  auto out = open_out(path);
  for (const auto& q : queries) {
    ordered_json j;
    j["query_id"] = q.query_id;
    j["text"] = q.text;
    if (q.target_id) j["target_id"] = *q.target_id;
    out << j.dump() << '\n';
  }
}

void attach_embeddings(Corpus& corpus, const EmbeddingMatrix& m) {
  std::unordered_map<std::string_view, Eigen::Index> row_of;
  for (std::size_t i = 0; i < m.ids.size(); ++i) row_of.emplace(m.ids[i], static_cast<Eigen::Index>(i));
  Matf ordered(static_cast<Eigen::Index>(corpus.size()), m.values.cols());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto it = row_of.find(corpus[i].doc_id);
    if (it == row_of.end()) throw InvalidArgument("no embedding for doc_id '" + corpus[i].doc_id + "'");
    ordered.row(static_cast<Eigen::Index>(i)) = m.values.row(it->second);
  }
  corpus.set_embeddings(std::move(ordered));
}

void attach_embeddings(std::span<Query> queries, const EmbeddingMatrix& m) {
  std::unordered_map<std::string_view, Eigen::Index> row_of;
  for (std::size_t i = 0; i < m.ids.size(); ++i) row_of.emplace(m.ids[i], static_cast<Eigen::Index>(i));
  for (auto& q : queries) {
    auto it = row_of.find(q.query_id);
    if (it == row_of.end()) throw InvalidArgument("no embedding for query_id '" + q.query_id + "'");
    q.embedding = m.values.row(it->second).transpose();
  }
}

}  // namespace derag
