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

// Eigen first: httplib pulls in <resolv.h>, whose _res macro breaks Eigen.
#include "derag/encoder.hpp"

#include <cmath>

#include <httplib.h>
#include <json.hpp>

namespace derag {

using nlohmann::json;

namespace {

constexpr double kPplTolerance = 1e-6;

json parse_body(const std::string& body, const std::string& path) {
  try {
    return json::parse(body);
  } catch (const json::exception& e) {
    throw ProtocolError(path + ": malformed response body: " + e.what());
  }
}

template <typename Fn>
void for_each_chunk(std::size_t n, std::size_t chunk, Fn&& fn) {
  for (std::size_t begin = 0; begin < n; begin += chunk) fn(begin, std::min(n, begin + chunk));
}

}  // namespace

HttpEncoder::HttpEncoder(EncoderEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  if (endpoint_.base_url.empty()) throw InvalidArgument("encoder url is empty");
  if (endpoint_.max_batch < 1) throw InvalidArgument("max_batch must be >= 1");
  if (endpoint_.retries < 0) throw InvalidArgument("retries must be >= 0");
}

namespace {

httplib::Client make_client(const EncoderEndpoint& ep) {
  httplib::Client cli(ep.base_url);
  const auto sec = ep.timeout_ms / 1000;
  const auto usec = (ep.timeout_ms % 1000) * 1000;
  cli.set_connection_timeout(sec, usec);
  cli.set_read_timeout(sec, usec);
  cli.set_write_timeout(sec, usec);
  return cli;
}

template <typename Call>
std::string with_retries(const EncoderEndpoint& ep, const std::string& path, Call&& call) {
  std::string last_error;
  for (int attempt = 0; attempt <= ep.retries; ++attempt) {
    httplib::Result res = call();
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return res->body;
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    throw ProtocolError(path + ": HTTP " + std::to_string(res->status) + ": " + res->body);
  }
  throw TransportError(path + ": " + last_error + " after " + std::to_string(ep.retries + 1) + " attempt(s)");
}

}  // namespace

std::string HttpEncoder::post(const std::string& path, const std::string& body) {
  count_request();
  return with_retries(endpoint_, path, [&] {
    auto cli = make_client(endpoint_);
    return cli.Post(path, body, "application/json");
  });
}

std::string HttpEncoder::get(const std::string& path) {
  count_request();
  return with_retries(endpoint_, path, [&] {
    auto cli = make_client(endpoint_);
    return cli.Get(path);
  });
}

bool HttpEncoder::healthy() {
  count_request();
  auto cli = make_client(endpoint_);
  auto res = cli.Get("/healthz");
  return res && res->status == 200;
}

EncoderInfo HttpEncoder::info() {
  json j = parse_body(get("/info"), "/info");
  EncoderInfo info;
  try {
    info.dim = j.at("dim").get<Eigen::Index>();
    info.vocab_size = j.at("vocab_size").get<std::size_t>();
    info.model_id = j.value("model_id", "");
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("/info: ") + e.what());
  }
  if (info.dim < 1) throw ProtocolError("/info: dim must be positive");
  std::lock_guard lock(mu_);
  if (dim_ && *dim_ != info.dim) throw ProtocolError("/info: dimension changed between calls");
  dim_ = info.dim;
  return info;
}

std::vector<Vecf> HttpEncoder::embed_batch(std::span<const std::string> texts) {
  std::vector<Vecf> out;
  out.reserve(texts.size());
  for_each_chunk(texts.size(), static_cast<std::size_t>(endpoint_.max_batch), [&](std::size_t b, std::size_t e) {
    json req;
    req["texts"] = std::vector<std::string>(texts.begin() + static_cast<std::ptrdiff_t>(b),
                                            texts.begin() + static_cast<std::ptrdiff_t>(e));
    json j = parse_body(post("/embed", req.dump()), "/embed");
    try {
      const auto dim = j.at("dim").get<Eigen::Index>();
      const auto& rows = j.at("embeddings");
      if (rows.size() != e - b) throw ProtocolError("/embed: expected " + std::to_string(e - b) + " embeddings");
      {
        std::lock_guard lock(mu_);
        if (dim_ && *dim_ != dim)
          throw ProtocolError("/embed: dimension " + std::to_string(dim) + " does not match " + std::to_string(*dim_));
        dim_ = dim;
      }
      for (const auto& r : rows) {
        if (static_cast<Eigen::Index>(r.size()) != dim) throw ProtocolError("/embed: row length does not match dim");
        Vecf v(dim);
        for (Eigen::Index i = 0; i < dim; ++i) v[i] = r[static_cast<std::size_t>(i)].get<float>();
        out.push_back(std::move(v));
      }
    } catch (const json::exception& ex) {
      throw ProtocolError(std::string("/embed: ") + ex.what());
    }
  });
  return out;
}

std::vector<MlmCandidate> HttpEncoder::mlm_fill(const std::string& text, int tail_len, int top_k) {
  if (top_k <= 0) return {};
  json req = {{"text", text}, {"tail_len", tail_len}, {"top_k", top_k}};
  json j = parse_body(post("/mlm_fill", req.dump()), "/mlm_fill");
  std::vector<MlmCandidate> out;
  try {
    for (const auto& c : j.at("candidates")) {
      MlmCandidate m{c.at("token_id").get<TokenId>(), c.value("surface", ""), c.at("prob").get<float>()};
      if (!(m.prob > 0.0f && m.prob <= 1.0f)) throw ProtocolError("/mlm_fill: probability outside (0, 1]");
      if (!out.empty() && m.prob > out.back().prob) throw ProtocolError("/mlm_fill: candidates not descending");
      out.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("/mlm_fill: ") + e.what());
  }
  if (out.size() > static_cast<std::size_t>(top_k)) throw ProtocolError("/mlm_fill: more than top_k candidates");
  return out;
}

std::vector<NllScore> HttpEncoder::nll(std::span<const std::string> texts) {
  std::vector<NllScore> out;
  out.reserve(texts.size());
  for_each_chunk(texts.size(), static_cast<std::size_t>(endpoint_.max_batch), [&](std::size_t b, std::size_t e) {
    json req;
    req["texts"] = std::vector<std::string>(texts.begin() + static_cast<std::ptrdiff_t>(b),
                                            texts.begin() + static_cast<std::ptrdiff_t>(e));
    json j = parse_body(post("/nll", req.dump()), "/nll");
    try {
      const auto& nll = j.at("nll");
      const auto& ppl = j.at("ppl");
      if (nll.size() != e - b || ppl.size() != e - b) throw ProtocolError("/nll: wrong number of scores");
      for (std::size_t i = 0; i < nll.size(); ++i) {
        NllScore s{nll[i].get<float>(), ppl[i].get<float>()};
        const double expected = std::exp(static_cast<double>(s.nll));
        if (std::abs(static_cast<double>(s.ppl) - expected) > kPplTolerance * std::max(1.0, expected))
          throw ProtocolError("/nll: ppl != exp(nll) for item " + std::to_string(b + i));
        out.push_back(s);
      }
    } catch (const json::exception& ex) {
      throw ProtocolError(std::string("/nll: ") + ex.what());
    }
  });
  return out;
}

}  // namespace derag
