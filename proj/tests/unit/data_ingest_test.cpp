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

#include <cstring>

#include <gtest/gtest.h>

#include "derag/data_ingest.hpp"
#include "support.hpp"

namespace derag {
namespace {

using testing::TempDir;
using testing::write_file;

TEST(Tokenize, LowercasesAndSplitsOnPunctuation) {
  EXPECT_EQ(tokenize("Hello, World! x2"), (std::vector<std::string>{"hello", "world", "x2"}));
  EXPECT_TRUE(tokenize("  ...  ").empty());
}

TEST(Tokenize, KeepsUtf8InsideWords) {
  EXPECT_EQ(tokenize("caf\xc3\xa9 ol\xc3\xa9"), (std::vector<std::string>{"caf\xc3\xa9", "ol\xc3\xa9"}));
}

TEST(Document, CountsTerms) {
  const Document d = Document::from_text("a", "the cat the hat");
  EXPECT_EQ(d.length, 4);
  EXPECT_EQ(d.term_freqs.at("the"), 2);
  EXPECT_EQ(d.term_freqs.at("cat"), 1);
}

TEST(Corpus, LookupAndAverageLength) {
  Corpus c({Document::from_text("x", "a b"), Document::from_text("y", "a b c d")});
  EXPECT_EQ(c.index_of("y"), 1u);
  EXPECT_FALSE(c.find("z"));
  EXPECT_THROW(c.index_of("z"), InvalidArgument);
  EXPECT_DOUBLE_EQ(c.avg_doc_len(), 3.0);
}

TEST(Corpus, RejectsDuplicateIds) {
  EXPECT_THROW(Corpus({Document::from_text("x", "a"), Document::from_text("x", "b")}), InvalidArgument);
}

TEST(CorpusIo, RoundTrip) {
  TempDir dir;
  Corpus c({Document::from_text("d1", "alpha beta"), Document::from_text("d2", "gamma")});
  write_corpus(dir / "c.jsonl", c);
  const Corpus back = load_corpus(dir / "c.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].doc_id, "d1");
  EXPECT_EQ(back[1].text, "gamma");
}

TEST(CorpusIo, ReportsLineOfBadRecord) {
  TempDir dir;
  write_file(dir / "c.jsonl", "{\"doc_id\":\"a\",\"text\":\"x\"}\n{\"doc_id\":\"b\"}\n");
  try {
    load_corpus(dir / "c.jsonl");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(CorpusIo, DuplicateIdIsParseError) {
  TempDir dir;
  write_file(dir / "c.jsonl", "{\"doc_id\":\"a\",\"text\":\"x\"}\n{\"doc_id\":\"a\",\"text\":\"y\"}\n");
  EXPECT_THROW(load_corpus(dir / "c.jsonl"), ParseError);
}

TEST(CorpusIo, MissingFileIsError) { EXPECT_THROW(load_corpus("/nonexistent/c.jsonl"), Error); }

TEST(QueryIo, RoundTripKeepsOptionalTarget) {
  TempDir dir;
  std::vector<Query> qs(2);
  qs[0] = {"q1", "what is x", std::nullopt, std::string("d9")};
  qs[1] = {"q2", "why", std::nullopt, std::nullopt};
  write_queries(dir / "q.jsonl", qs);
  const auto back = load_queries(dir / "q.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].target_id, std::optional<std::string>("d9"));
  EXPECT_FALSE(back[1].target_id);
}

TEST(MatrixBin, RoundTripIsBitExact) {
  TempDir dir;
  Matf m(3, 4);
  m << 1.0f, -2.5f, 3.25f, 1e-30f, 0.0f, -0.0f, 7.0f, 8.0f, 1e30f, 2.0f, 3.0f, 4.0f;
  write_matrix_bin(dir / "m.bin", m);
  const Matf back = read_matrix_bin(dir / "m.bin");
  ASSERT_EQ(back.rows(), 3);
  ASSERT_EQ(back.cols(), 4);
  EXPECT_EQ(std::memcmp(back.data(), m.data(), sizeof(float) * 12), 0);
}

TEST(MatrixBin, RejectsBadMagicAndTruncation) {
  TempDir dir;
  write_file(dir / "bad.bin", "NOPE0000000000000000");
  EXPECT_THROW(read_matrix_bin(dir / "bad.bin"), FormatError);
  Matf m = Matf::Ones(2, 2);
  write_matrix_bin(dir / "m.bin", m);
  std::string bytes = testing::read_file(dir / "m.bin");
  write_file(dir / "t.bin", bytes.substr(0, bytes.size() - 1));
  EXPECT_THROW(read_matrix_bin(dir / "t.bin"), FormatError);
  write_file(dir / "x.bin", bytes + "z");
  EXPECT_THROW(read_matrix_bin(dir / "x.bin"), FormatError);
}

TEST(EmbeddingMatrix, AttachReordersById) {
  TempDir dir;
  Corpus c({Document::from_text("a", "x"), Document::from_text("b", "y")});
  EmbeddingMatrix m;
  m.values.resize(2, 2);
  m.values << 2, 2, 1, 1;
  m.ids = {"b", "a"};
  write_embedding_matrix(dir / "e.bin", m);
  attach_embeddings(c, load_embedding_matrix(dir / "e.bin"));
  EXPECT_EQ(c.embedding(0)[0], 1.0f);
  EXPECT_EQ(c.embedding(1)[0], 2.0f);
}

TEST(EmbeddingMatrix, MissingRowIsError) {
  Corpus c({Document::from_text("a", "x"), Document::from_text("b", "y")});
  EmbeddingMatrix m;
  m.values = Matf::Ones(1, 2);
  m.ids = {"a"};
  EXPECT_THROW(attach_embeddings(c, m), InvalidArgument);
}

TEST(TokenTableIo, RoundTripWithSpecials) {
  TempDir dir;
  std::vector<Token> toks = {{0, "[CLS]", true}, {1, "hello", false}, {2, "##ing", false}};
  Matf e(3, 2);
  e << 0, 0, 1, 2, 3, 4;
  write_token_table(dir / "t.bin", TokenTable(toks, e));
  const std::vector<std::string> extra = {"##ing"};
  const TokenTable back = load_token_table(dir / "t.bin", std::nullopt, extra);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_TRUE(back.is_special(0));
  EXPECT_TRUE(back.is_special(2));
  EXPECT_EQ(back.searchable(), (std::vector<TokenId>{1}));
  EXPECT_EQ(back.find("hello"), std::optional<TokenId>(1));
  EXPECT_EQ(back.embedding(1)[1], 2.0f);
}

TEST(TokenTable, RequiresDenseIds) {
  std::vector<Token> toks = {{0, "a", false}, {2, "b", false}};
  EXPECT_THROW(TokenTable(toks, Matf::Zero(2, 2)), InvalidArgument);
}

}  // namespace
}  // namespace derag
