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

#include <string>
#include <string_view>
#include <vector>

#include "derag/data_ingest.hpp"

namespace derag {

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (is_word_byte(c)) {
      cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Document Document::from_text(std::string doc_id, std::string text) {
  Document d;
  d.doc_id = std::move(doc_id);
  d.text = std::move(text);
  for (auto& term : tokenize(d.text)) {
    ++d.term_freqs[term];
    ++d.length;
  }
  return d;
}

std::string_view to_string(Position p) { return p == Position::suffix ? "suffix" : "prefix"; }

Position parse_position(std::string_view s) {
  if (s == "suffix") return Position::suffix;
  if (s == "prefix") return Position::prefix;
  throw InvalidArgument("unknown position '" + std::string(s) + "'");
}

}  // namespace derag
