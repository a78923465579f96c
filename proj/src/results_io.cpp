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

#include "derag/results.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace derag {

using nlohmann::json;
using nlohmann::ordered_json;

std::optional<int> first_success_len(const AttackResult& r) {
  // No stage runs only when the bare query already placed the target.
  if (r.stages_run == 0 && !r.partial) return 0;
  for (const auto& [L, ok] : r.stage_success)
    if (ok) return L;
  return std::nullopt;
}

EvalRecord to_eval_record(const AttackResult& r) {
  EvalRecord e;
  e.query_id = r.query_id;
  e.rank_before = r.rank_before;
  e.rank_after = r.rank_after;
  e.cos_before = r.cos_before;
  e.cos_after = r.cos_after;
  e.cos_suffix = r.cos_suffix;
  e.suffix_len = r.suffix_len;
  e.iterations = r.iterations_used;
  return e;
}

namespace {

template <typename J>
void put_optional(J& j, const char* key, const std::optional<double>& v) {
  if (v)
    j[key] = *v;
  else
    j[key] = nullptr;
}

std::optional<double> get_optional(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

template <typename J>
J bool_map(const std::map<int, bool>& m) {
  J o = J::object();
  for (const auto& [k, v] : m) o[std::to_string(k)] = v;
  return o;
}

std::map<int, bool> read_bool_map(const json& j) {
  std::map<int, bool> m;
  for (auto it = j.begin(); it != j.end(); ++it) m[std::stoi(it.key())] = it.value().get<bool>();
  return m;
}

}  // namespace

std::string to_json_line(const AttackResult& r) {
  ordered_json j;
  j["schema"] = kResultSchema;
  j["query_id"] = r.query_id;
  j["target_id"] = r.target_id;
  j["retriever"] = r.retriever;
  j["variant"] = to_string(r.variant);
  j["position"] = to_string(r.position);
  j["loss"] = to_string(r.loss);
  j["k"] = r.k;
  j["final_suffix"] = {{"token_ids", r.suffix_ids}, {"surfaces", r.suffix_surfaces}};
  j["suffix_len"] = r.suffix_len;
  j["iterations_used"] = r.iterations_used;
  j["generations"] = r.generations;
  j["stages_run"] = r.stages_run;
  j["stage_success"] = bool_map<ordered_json>(r.stage_success);
  j["success"] = r.success;
  j["success_at"] = bool_map<ordered_json>(r.success_at);
  j["rank_before"] = r.rank_before;
  j["rank_after"] = r.rank_after;
  j["loss_final"] = r.loss_final;
  put_optional(j, "cos_before", r.cos_before);
  put_optional(j, "cos_after", r.cos_after);
  put_optional(j, "cos_suffix", r.cos_suffix);
  j["partial"] = r.partial;
  j["error"] = r.error;
  j["wall_time_ms"] = r.wall_time_ms;
  return j.dump();
}

AttackResult from_json_line(const std::string& line) {
  const json j = json::parse(line);
  const int schema = j.at("schema").get<int>();
  if (schema != kResultSchema) throw FormatError("unsupported result schema " + std::to_string(schema));
  AttackResult r;
  r.query_id = j.at("query_id").get<std::string>();
  r.target_id = j.at("target_id").get<std::string>();
  r.retriever = j.at("retriever").get<std::string>();
  r.variant = parse_variant(j.at("variant").get<std::string>());
  r.position = parse_position(j.at("position").get<std::string>());
  r.loss = parse_loss_kind(j.at("loss").get<std::string>());
  r.k = j.at("k").get<int>();
  r.suffix_ids = j.at("final_suffix").at("token_ids").get<TokenSeq>();
  r.suffix_surfaces = j.at("final_suffix").at("surfaces").get<std::vector<std::string>>();
  r.suffix_len = j.at("suffix_len").get<int>();
  r.iterations_used = j.at("iterations_used").get<std::size_t>();
  r.generations = j.at("generations").get<int>();
  r.stages_run = j.at("stages_run").get<int>();
  r.stage_success = read_bool_map(j.at("stage_success"));
  r.success = j.at("success").get<bool>();
  r.success_at = read_bool_map(j.at("success_at"));
  r.rank_before = j.at("rank_before").get<int>();
  r.rank_after = j.at("rank_after").get<int>();
  r.loss_final = j.at("loss_final").get<double>();
  r.cos_before = get_optional(j, "cos_before");
  r.cos_after = get_optional(j, "cos_after");
  r.cos_suffix = get_optional(j, "cos_suffix");
  r.partial = j.at("partial").get<bool>();
  r.error = j.at("error").get<std::string>();
  r.wall_time_ms = j.at("wall_time_ms").get<double>();
  return r;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error("write failed: " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

void write_results(const std::filesystem::path& path, const std::vector<AttackResult>& results) {
  std::string text;
  for (const auto& r : results) text += to_json_line(r) + "\n";
  write_text_atomic(path, text);
}

std::vector<AttackResult> read_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<AttackResult> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(from_json_line(line));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), n);
    } catch (const Error& e) {
      throw ParseError(path.string() + ": " + e.what(), n);
    }
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  ordered_json j;
  j["tool_version"] = m.tool_version;
  j["timestamp"] = m.timestamp;
  j["command"] = m.command;
  j["options"] = m.options;
  write_text_atomic(path, j.dump(2) + "\n");
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  try {
    const json j = json::parse(in);
    RunManifest m;
    m.tool_version = j.at("tool_version").get<std::string>();
    m.timestamp = j.at("timestamp").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.options = j.at("options").get<std::map<std::string, std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

}  // namespace derag
