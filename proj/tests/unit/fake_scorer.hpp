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

#include <functional>

#include "derag/objective.hpp"

namespace derag::testing {

/// Scores computed by a plain function of the candidate. The bare-query
/// self score is fixed, so literal success can be switched off.
class FakeScorer final : public QueryScorer {
 public:
  using Fn = std::function<Vecf(const TokenSeq&)>;
  FakeScorer(std::size_t n, Fn fn, float self_score = 1e9f) : n_(n), fn_(std::move(fn)), self_(self_score) {}

  std::vector<CandidateScores> score(std::span<const TokenSeq> candidates) override {
    std::vector<CandidateScores> out;
    for (const auto& c : candidates) {
      CandidateScores s;
      s.doc_scores = fn_(c);
      s.query_self_score = self_;
      out.push_back(std::move(s));
    }
    calls += candidates.size();
    return out;
  }
  std::size_t corpus_size() const override { return n_; }

  std::size_t calls = 0;

 private:
  std::size_t n_;
  Fn fn_;
  float self_;
};

}  // namespace derag::testing
