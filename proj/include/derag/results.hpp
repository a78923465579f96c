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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "derag/de.hpp"
#include "derag/metrics.hpp"

namespace derag {

inline constexpr int kResultSchema = 1;

struct AttackResult {
  std::string query_id;
  std::string target_id;
  std::string retriever = "dense";
  Variant variant = Variant::seq_stop;
  Position position = Position::suffix;
  LossKind loss = LossKind::hinge;
  int k = 10;
  TokenSeq suffix_ids;
  std::vector<std::string> suffix_surfaces;
  int suffix_len = 0;
  std::size_t iterations_used = 0;
  int generations = 0;
  int stages_run = 0;
  /// Stage length -> whether that stage's best solved the objective.
  std::map<int, bool> stage_success;
  /// Stopping-rule success at `k`.
  bool success = false;
  std::map<int, bool> success_at;
  int rank_before = 1;
  int rank_after = 1;
  double loss_final = 0.0;
  std::optional<double> cos_before;
  std::optional<double> cos_after;
  std::optional<double> cos_suffix;
  bool partial = false;
  std::string error;
  double wall_time_ms = 0.0;
};

/// Shortest stage length whose best solved the objective; 0 when the empty
/// suffix already did, nullopt when no stage did.
std::optional<int> first_success_len(const AttackResult& r);

EvalRecord to_eval_record(const AttackResult& r);

/// One JSON object, keys in a fixed order.
std::string to_json_line(const AttackResult& r);
AttackResult from_json_line(const std::string& line);

/// Writes via a temporary file and rename, so a failed run leaves nothing.
void write_results(const std::filesystem::path& path, const std::vector<AttackResult>& results);
std::vector<AttackResult> read_results(const std::filesystem::path& path);

struct RunManifest {
  std::string tool_version;
  std::string timestamp;
  std::string command;
  /// Every option that shaped the run, by long flag name.
  std::map<std::string, std::string> options;
};

void write_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);

/// Atomic text write through `path`.tmp.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace derag
