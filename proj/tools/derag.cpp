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

// derag: attack, ablate, probe, report and synth subcommands.
//
// Exit codes: 0 ok, 1 some attacks ended partial, 2 configuration or I/O
// error (nothing written).

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "derag/harness.hpp"
#include "derag/synthetic.hpp"

namespace fs = std::filesystem;
using namespace derag;

namespace {

constexpr int kExitPartial = 1;
constexpr int kExitConfig = 2;

// Option values are kept as strings keyed by long flag name so the manifest
// can record them verbatim and --from-manifest can replay them as flags.
using Values = std::map<std::string, std::string>;

void opt(CLI::App* app, Values& v, const std::string& name, const std::string& def, const std::string& help) {
  v[name] = def;
  app->add_option("--" + name, v[name], help)->capture_default_str();
}

void data_options(CLI::App* app, Values& v) {
  opt(app, v, "data-dir", "", "Directory holding corpus.jsonl, queries.jsonl, tokens.bin and optional embeddings");
  opt(app, v, "corpus", "", "Corpus JSONL");
  opt(app, v, "queries", "", "Queries JSONL");
  opt(app, v, "token-table", "", "Token embedding table (.bin with .tokens.jsonl sidecar)");
  opt(app, v, "doc-emb", "", "Document embedding matrix");
  opt(app, v, "query-emb", "", "Query embedding matrix");
  opt(app, v, "encoder", "synthetic", "synthetic|http");
  opt(app, v, "encoder-url", "", "Encoder service URL (falls back to DERAG_ENCODER_URL)");
}

void attack_options(CLI::App* app, Values& v) {
  data_options(app, v);
  opt(app, v, "retriever", "dense", "dense|bm25");
  opt(app, v, "variant", "seq_stop", "seq_stop|fixed_stop|seq|random");
  opt(app, v, "position", "suffix", "suffix|prefix");
  opt(app, v, "loss", "hinge", "hinge|cosine|robust_hinge");
  opt(app, v, "success-mode", "literal", "literal|displacement");
  opt(app, v, "k", "10", "Top-k cutoff");
  opt(app, v, "n-max", "5", "Maximum suffix length");
  opt(app, v, "pop", "24", "Population size N");
  opt(app, v, "gens", "120", "Generations per stage G");
  opt(app, v, "cr", "0.5", "Crossover rate");
  opt(app, v, "f", "0.5", "Scale factor");
  opt(app, v, "patience", "10", "Plateau patience T");
  opt(app, v, "pool-mode", "full", "full|mlm");
  opt(app, v, "pool-size", "500", "MLM pool size");
  opt(app, v, "tail-len", "5", "MLM masked tail length");
  opt(app, v, "contrastive-n", "0", "Restrict tau_k to the top-n query-similar documents (0 = full corpus)");
  opt(app, v, "target-rank", "0", "Target = document at this rank when a query has no target_id");
  opt(app, v, "budget", "0", "Random-baseline evaluation budget (0 = pop * gens)");
  opt(app, v, "seed", "0", "Root seed");
  opt(app, v, "jobs", "1", "Worker threads");
}

template <typename T>
T num_value(const Values& v, const std::string& key) {
  const std::string& s = v.at(key);
  try {
    std::size_t used = 0;
    T out;
    if constexpr (std::is_floating_point_v<T>)
      out = static_cast<T>(std::stod(s, &used));
    else if constexpr (std::is_unsigned_v<T>)
      out = static_cast<T>(std::stoull(s, &used));
    else
      out = static_cast<T>(std::stoll(s, &used));
    if (used != s.size()) throw std::invalid_argument(s);
    return out;
  } catch (const std::logic_error&) {
    throw InvalidArgument("--" + key + ": not a number: '" + s + "'");
  }
}

DataPaths data_paths(const Values& v) {
  DataPaths p;
  const fs::path dir = v.at("data-dir");
  auto pick = [&](const std::string& key, const char* file) -> fs::path {
    if (!v.at(key).empty()) return v.at(key);
    if (!dir.empty()) return dir / file;
    return {};
  };
  p.corpus = pick("corpus", "corpus.jsonl");
  p.queries = pick("queries", "queries.jsonl");
  p.token_table = pick("token-table", "tokens.bin");
  if (p.corpus.empty() || p.queries.empty() || p.token_table.empty())
    throw InvalidArgument("need --corpus, --queries and --token-table (or --data-dir)");
  for (const auto* f : {&p.corpus, &p.queries, &p.token_table})
    if (!fs::exists(*f)) throw Error("no such file: " + f->string());
  auto optional_path = [&](const std::string& key, const char* file) -> std::optional<fs::path> {
    if (!v.at(key).empty()) return fs::path(v.at(key));
    if (!dir.empty() && fs::exists(dir / file)) return dir / file;
    return std::nullopt;
  };
  p.doc_emb = optional_path("doc-emb", "doc_emb.bin");
  p.query_emb = optional_path("query-emb", "query_emb.bin");
  return p;
}

EncoderChoice encoder_choice(const Values& v) {
  return {parse_encoder_kind(v.at("encoder")), v.at("encoder-url")};
}

AttackOptions attack_config(const Values& v) {
  AttackOptions o;
  o.retriever = parse_retriever_kind(v.at("retriever"));
  o.de.variant = parse_variant(v.at("variant"));
  o.de.position = parse_position(v.at("position"));
  o.loss = parse_loss_kind(v.at("loss"));
  o.success = parse_success_mode(v.at("success-mode"));
  o.k = num_value<int>(v, "k");
  o.de.n_max = num_value<int>(v, "n-max");
  o.de.N = num_value<int>(v, "pop");
  o.de.G = num_value<int>(v, "gens");
  o.de.CR = num_value<float>(v, "cr");
  o.de.F = num_value<float>(v, "f");
  o.de.T = num_value<int>(v, "patience");
  o.de.seed = num_value<std::uint64_t>(v, "seed");
  o.de.budget = num_value<std::size_t>(v, "budget");
  o.pool.mode = parse_pool_mode(v.at("pool-mode"));
  o.pool.pool_size = num_value<int>(v, "pool-size");
  o.pool.tail_len = num_value<int>(v, "tail-len");
  o.pool.contrastive_n = num_value<int>(v, "contrastive-n");
  o.target_rank = num_value<int>(v, "target-rank");
  if (o.k < 1) throw InvalidArgument("--k must be >= 1");
  o.de.validate();
  o.pool.validate();
  return o;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path manifest_path(const fs::path& out) {
  fs::path m = out;
  m += ".manifest.json";
  return m;
}

void save_manifest(const fs::path& out, const std::string& command, const Values& v) {
  RunManifest m;
  m.tool_version = kToolVersion;
  m.timestamp = utc_timestamp();
  m.command = command;
  for (const auto& [key, value] : v)
    if (key != "out" && key != "from-manifest") m.options[key] = value;
  write_manifest(manifest_path(out), m);
}

std::vector<int> int_list(const std::vector<std::string>& xs, const char* flag) {
  std::vector<int> out;
  for (const auto& x : xs) try {
      out.push_back(std::stoi(x));
    } catch (const std::logic_error&) {
      throw InvalidArgument(std::string(flag) + ": not an integer: '" + x + "'");
    }
  return out;
}

// --- subcommands ------------------------------------------------------------

int cmd_attack(const Values& v) {
  const fs::path out = v.at("out");
  const AttackOptions opts = attack_config(v);
  const int jobs = num_value<int>(v, "jobs");
  auto ws = load_workspace(data_paths(v), encoder_choice(v));
  const auto results = run_attacks(*ws, opts, jobs, &std::cerr);
  write_results(out, results);
  save_manifest(out, "attack", v);
  std::size_t partial = 0, solved = 0;
  for (const auto& r : results) {
    partial += r.partial;
    solved += r.rank_after <= r.k;
  }
  std::cerr << "wrote " << results.size() << " results to " << out.string() << " (" << solved << " in top-"
            << opts.k << ", " << partial << " partial)\n";
  return partial ? kExitPartial : 0;
}

int cmd_ablate(const Values& v, const std::vector<std::string>& lengths, const std::vector<std::string>& pools,
               const std::vector<std::string>& losses) {
  const fs::path out = v.at("out");
  const AttackOptions opts = attack_config(v);
  AblationGrid grid;
  grid.suffix_lengths = int_list(lengths, "--lengths");
  grid.pool_sizes = int_list(pools, "--pool-sizes");
  for (const auto& l : losses) grid.losses.push_back(parse_loss_kind(l));
  auto ws = load_workspace(data_paths(v), encoder_choice(v));
  const auto rows = run_ablation(*ws, opts, grid, num_value<int>(v, "jobs"), &std::cerr);
  write_text_atomic(out, ablation_csv(rows, opts.k));
  Values recorded = v;
  auto join = [](const std::vector<std::string>& xs) {
    std::string s;
    for (const auto& x : xs) s += (s.empty() ? "" : ",") + x;
    return s;
  };
  recorded["lengths"] = join(lengths);
  recorded["pool-sizes"] = join(pools);
  recorded["losses"] = join(losses);
  save_manifest(out, "ablate", recorded);
  return 0;
}

int cmd_probe(const Values& v, bool slope_vs_rank) {
  const fs::path out = v.at("out");
  ProbeConfig pc;
  pc.eta = num_value<double>(v, "eta");
  pc.n_directions = num_value<int>(v, "directions");
  pc.grid = num_value<int>(v, "grid");
  pc.eps_slope = num_value<double>(v, "eps-slope");
  pc.n_pert = num_value<int>(v, "n-pert");
  pc.validate();
  const auto seed = num_value<std::uint64_t>(v, "seed");

  if (slope_vs_rank) {
    const AttackOptions opts = attack_config(v);
    auto ws = load_workspace(data_paths(v), encoder_choice(v));
    const SlopeRankResult r = slope_vs_rank_experiment(*ws, opts, pc, num_value<int>(v, "jobs"));
    write_text_atomic(out, slope_pairs_csv(r));
    std::cerr << "pearson r = " << r.r << ", p = " << r.p << " over " << r.pairs.size() << " queries\n";
    save_manifest(out, "probe", v);
    return 0;
  }

  Vecd q, d;
  if (!v.at("query-id").empty()) {
    auto ws = load_workspace(data_paths(v), encoder_choice(v));
    const Query* query = nullptr;
    for (const auto& c : ws->queries())
      if (c.query_id == v.at("query-id")) query = &c;
    if (!query) throw InvalidArgument("unknown query id '" + v.at("query-id") + "'");
    const std::string target = !v.at("target-id").empty() ? v.at("target-id") : query->target_id.value_or("");
    if (target.empty()) throw InvalidArgument("need --target-id for a query without target_id");
    SequenceEmbedder emb(ws->encoder(), ws->table());
    q = emb.embed_query(*query).cast<double>();
    d = ws->dense().corpus().embedding(ws->corpus().index_of(target)).cast<double>();
  } else {
    const auto dim = num_value<int>(v, "dim");
    if (dim < 3) throw InvalidArgument("--dim must be >= 3");
    Rng rng(derive_seed(seed, {0x71ULL}));
    q = random_unit<double>(dim, rng);
    d = random_unit<double>(dim, rng);
  }
  write_text_atomic(out, probe_surface_csv(q, d, pc, seed, num_value<int>(v, "plane")));
  save_manifest(out, "probe", v);
  return 0;
}

int cmd_report(const Values& v, const std::vector<std::string>& files, const std::vector<double>& fprs,
               bool lower_is_adversarial, bool nll) {
  if (files.empty()) throw InvalidArgument("report needs at least one results file");
  const fs::path dir = v.at("out");
  std::vector<ReportInput> inputs;
  for (const auto& f : files) {
    // label=path names an input explicitly; otherwise the file stem is used.
    const auto eq = f.find('=');
    const fs::path p = eq == std::string::npos ? fs::path(f) : fs::path(f.substr(eq + 1));
    const std::string label = eq == std::string::npos ? p.stem().string() : f.substr(0, eq);
    inputs.push_back({label, read_results(p)});
  }
  ReportOptions ro;
  ro.delta_cos = parse_delta_cos_mode(v.at("delta-cos"));
  if (!fprs.empty()) ro.detector_fprs = fprs;
  ro.higher_is_adversarial = !lower_is_adversarial;
  if (!v.at("detector-scores").empty()) ro.detector_scores = fs::path(v.at("detector-scores"));

  std::unique_ptr<Workspace> ws;
  std::unique_ptr<Encoder> http;
  if (nll) {
    const EncoderChoice ec = encoder_choice(v);
    if (ec.kind == EncoderKind::http) {
      std::string url = ec.url;
      if (url.empty())
        if (const char* env = std::getenv("DERAG_ENCODER_URL")) url = env;
      if (url.empty()) throw InvalidArgument("--nll with the http encoder needs --encoder-url");
      http = std::make_unique<HttpEncoder>(EncoderEndpoint{url});
      ro.nll_encoder = http.get();
    } else {
      ws = load_workspace(data_paths(v), ec);
      ro.nll_encoder = &ws->encoder();
    }
  }

  const ReportTables t = build_report(inputs, ro);
  fs::create_directories(dir);
  write_text_atomic(dir / "main.csv", t.main_csv);
  write_text_atomic(dir / "cumulative.csv", t.cumulative_csv);
  write_text_atomic(dir / "complementarity.csv", t.complementarity_csv);
  if (!t.detector_csv.empty()) write_text_atomic(dir / "detector.csv", t.detector_csv);
  if (!t.readability_csv.empty()) write_text_atomic(dir / "readability.csv", t.readability_csv);
  write_text_atomic(dir / "report.json", t.json);
  std::cerr << "wrote report to " << dir.string() << "\n";
  return 0;
}

int cmd_synth(const Values& v) {
  const std::string kind = v.at("kind");
  const auto seed = num_value<std::uint64_t>(v, "seed");
  World w;
  if (kind == "dense") {
    DenseWorldSpec s;
    s.n_docs = num_value<int>(v, "docs");
    s.dim = num_value<int>(v, "dim");
    s.vocab = num_value<int>(v, "vocab");
    s.n_queries = num_value<int>(v, "n-queries");
    s.target_rank = num_value<int>(v, "target-rank");
    s.seed = seed;
    w = make_dense_world(s);
  } else if (kind == "cluster") {
    ClusterWorldSpec s;
    s.n_docs = num_value<int>(v, "docs");
    s.dim = num_value<int>(v, "dim");
    s.n_queries = num_value<int>(v, "n-queries");
    s.target_rank = num_value<int>(v, "target-rank");
    s.seed = seed;
    w = make_cluster_world(s);
  } else if (kind == "text") {
    TextWorldSpec s;
    s.n_docs = num_value<int>(v, "docs");
    s.dim = num_value<int>(v, "dim");
    s.vocab = num_value<int>(v, "vocab");
    s.n_queries = num_value<int>(v, "n-queries");
    s.target_rank = num_value<int>(v, "target-rank");
    s.seed = seed;
    w = make_text_world(s);
  } else {
    throw InvalidArgument("--kind must be dense, cluster or text");
  }
  const fs::path dir = v.at("out");
  fs::create_directories(dir);
  save_world(dir, w);
  std::cerr << "wrote " << kind << " world (" << w.corpus.size() << " docs, " << w.queries.size() << " queries, "
            << w.table.size() << " tokens) to " << dir.string() << "\n";
  return 0;
}

// Splices the options recorded in a manifest in front of the user's own
// arguments, so anything given explicitly still wins.
std::vector<std::string> expand_manifest(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::optional<fs::path> manifest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--from-manifest" && i + 1 < args.size()) {
      manifest = args[++i];
    } else if (args[i].rfind("--from-manifest=", 0) == 0) {
      manifest = args[i].substr(16);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!manifest) return args;
  const RunManifest m = read_manifest(*manifest);
  std::vector<std::string> out = {rest.empty() ? "derag" : rest.front(), m.command};
  for (const auto& [key, value] : m.options) {
    if (value.empty()) continue;
    out.push_back("--" + key);
    out.push_back(value);
  }
  // Skip a repeated subcommand name in the user's arguments.
  std::size_t start = 1;
  if (rest.size() > 1 && rest[1] == m.command) start = 2;
  out.insert(out.end(), rest.begin() + static_cast<std::ptrdiff_t>(std::min(start, rest.size())), rest.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  try {
    args = expand_manifest(args);
  } catch (const std::exception& e) {
    std::cerr << "derag: " << e.what() << "\n";
    return kExitConfig;
  }

  CLI::App app{"Differential-evolution token attacks on dense and sparse retrievers"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string from_manifest;
  app.add_option("--from-manifest", from_manifest, "Replay the options recorded in a run manifest");

  Values va, vb, vp, vr, vs;

  auto* attack = app.add_subcommand("attack", "Run one attack per query and write results JSONL");
  attack_options(attack, va);
  va["out"] = "";
  attack->add_option("--out", va["out"], "Results JSONL path")->required();

  auto* ablate = app.add_subcommand("ablate", "Sweep suffix length, pool size and loss");
  attack_options(ablate, vb);
  vb["out"] = "";
  ablate->add_option("--out", vb["out"], "Summary CSV path")->required();
  std::vector<std::string> lengths, pool_sizes, losses;
  ablate->add_option("--lengths", lengths, "Fixed suffix lengths, e.g. 1,2,3,4,5")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  ablate->add_option("--pool-sizes", pool_sizes, "MLM pool sizes")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  ablate->add_option("--losses", losses, "Losses to compare, e.g. hinge,cosine")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);

  auto* probe = app.add_subcommand("probe", "Scan the cosine surface or correlate local slope with rank gain");
  attack_options(probe, vp);
  opt(probe, vp, "query-id", "", "Probe this query (needs data flags); otherwise random vectors");
  opt(probe, vp, "target-id", "", "Target document (defaults to the query's target_id)");
  opt(probe, vp, "dim", "64", "Dimension of the random probe vectors");
  opt(probe, vp, "grid", "41", "Grid points per axis");
  opt(probe, vp, "eta", "0.001", "Finite-difference step");
  opt(probe, vp, "directions", "512", "Sampled directions for d1");
  opt(probe, vp, "plane", "2", "2 scans (d1,d2), 3 scans (d1,d3)");
  opt(probe, vp, "eps-slope", "0.4", "Noise scale for the local slope");
  opt(probe, vp, "n-pert", "12", "Perturbations per local-slope estimate");
  bool slope_vs_rank = false;
  probe->add_flag("--slope-vs-rank", slope_vs_rank, "Run robust-hinge attacks and correlate slope with rank gain");
  vp["out"] = "";
  probe->add_option("--out", vp["out"], "CSV path")->required();

  auto* report = app.add_subcommand("report", "Aggregate results files into CSV and JSON tables");
  std::vector<std::string> files;
  report->add_option("results", files, "Results JSONL files, optionally label=path")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  data_options(report, vr);
  opt(report, vr, "delta-cos", "query_baseline", "query_baseline|paper_literal");
  opt(report, vr, "detector-scores", "", "CSV of score,label (adversarial|clean)");
  std::vector<double> fprs;
  report->add_option("--fpr", fprs, "Target false-positive rates")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  bool lower_is_adversarial = false, nll = false;
  report->add_flag("--lower-is-adversarial", lower_is_adversarial, "Detector scores are higher for clean inputs");
  report->add_flag("--nll", nll, "Score suffix fluency through the encoder");
  vr["out"] = "";
  report->add_option("--out", vr["out"], "Output directory")->required();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic fixture world");
  opt(synth, vs, "kind", "dense", "dense|cluster|text");
  opt(synth, vs, "docs", "1000", "Number of documents");
  opt(synth, vs, "dim", "32", "Embedding dimension");
  opt(synth, vs, "vocab", "256", "Vocabulary size (dense, text)");
  opt(synth, vs, "n-queries", "100", "Number of queries");
  opt(synth, vs, "target-rank", "100", "Planted target rank");
  opt(synth, vs, "seed", "1", "Seed");
  vs["out"] = "";
  synth->add_option("--out", vs["out"], "Output directory")->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(std::move(rev));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*attack) return cmd_attack(va);
    if (*ablate) return cmd_ablate(vb, lengths, pool_sizes, losses);
    if (*probe) return cmd_probe(vp, slope_vs_rank);
    if (*report) return cmd_report(vr, files, fprs, lower_is_adversarial, nll);
    if (*synth) return cmd_synth(vs);
  } catch (const std::exception& e) {
    std::cerr << "derag: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
