/*
 * Copyright 2026 The memaudit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "memaudit/likelihood.h"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "absl/strings/str_cat.h"
#include "json.hpp"
#include "memaudit/file_util.h"
#include "memaudit/status_macros.h"
#include "memaudit/text.h"

namespace memaudit {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr double kTotalTolerance = 1e-6;
// Servers usually accumulate in float32, so their reported total is only
// checked loosely; the stored total is always recomputed.
constexpr double kServerTotalTolerance = 1e-4;

absl::Status ProtocolViolation(std::string_view what) {
  return absl::InternalError(absl::StrCat("protocol violation: ", std::string(what)));
}

double Sum(const std::vector<double>& values) {
  double total = 0.0;
  for (double v : values) total += v;
  return total;
}

std::string CacheKey(const std::string& model, const std::string& text) {
  return absl::StrCat(model, "\x1f", text);
}

ordered_json ResultJson(const std::string& model, const NllResult& r) {
  return ordered_json{{"model", model},
                      {"text", r.text},
                      {"tokens", r.tokens},
                      {"token_nlls", r.token_nlls},
                      {"total_nll", r.total_nll}};
}

}  // namespace

absl::Status ValidateNllResult(const NllResult& result) {
  if (result.token_nlls.empty()) {
    return ProtocolViolation("no tokens scored");
  }
  if (!result.tokens.empty() && result.tokens.size() != result.token_nlls.size()) {
    return ProtocolViolation(absl::StrCat("got ", result.tokens.size(),
                                          " tokens but ",
                                          result.token_nlls.size(), " NLLs"));
  }
  for (double v : result.token_nlls) {
    if (!std::isfinite(v)) return ProtocolViolation("non-finite token NLL");
    if (v < 0.0) {
      return ProtocolViolation(
          absl::StrCat("negative token NLL ", v, " (positive log-probability)"));
    }
  }
  if (std::fabs(result.total_nll - Sum(result.token_nlls)) > kTotalTolerance) {
    return ProtocolViolation("total_nll does not match the token NLL sum");
  }
  return absl::OkStatus();
}

std::string NllResultToJson(const NllResult& result) {
  ordered_json j{{"text", result.text},
                 {"tokens", result.tokens},
                 {"token_nlls", result.token_nlls},
                 {"total_nll", result.total_nll}};
  return j.dump();
}

MockNllBackend::MockNllBackend(Table table, std::string model_id)
    : table_(std::move(table)), model_id_(std::move(model_id)) {}

absl::StatusOr<std::unique_ptr<MockNllBackend>> MockNllBackend::FromFile(
    const std::string& path, std::string model_id) {
  MEMAUDIT_ASSIGN_OR_RETURN(std::string text, ReadFile(path));
  json root = json::parse(text, nullptr, false);
  if (root.is_discarded() || !root.is_object()) {
    return absl::InvalidArgumentError(
        absl::StrCat("mock table ", path, " is not a JSON object"));
  }
  Table table;
  for (const auto& [key, nlls] : root.items()) {
    if (!nlls.is_array()) {
      return absl::InvalidArgumentError(
          absl::StrCat("mock table entry for '", key, "' is not an array"));
    }
    std::vector<double> values;
    for (const json& v : nlls) {
      if (!v.is_number()) {
        return absl::InvalidArgumentError(
            absl::StrCat("mock table entry for '", key, "' has a non-number"));
      }
      values.push_back(v.get<double>());
    }
    table.emplace(key, std::move(values));
  }
  return std::make_unique<MockNllBackend>(std::move(table), std::move(model_id));
}

absl::StatusOr<NllResult> MockNllBackend::Score(const std::string& text) {
  if (before_score_) before_score_(text);
  auto it = table_.find(text);
  if (it == table_.end()) {
    return absl::NotFoundError(absl::StrCat("mock table has no entry for '", text, "'"));
  }
  NllResult r;
  r.text = text;
  r.token_nlls = it->second;
  r.total_nll = Sum(r.token_nlls);
  return r;
}

HttpNllBackend::HttpNllBackend(std::string endpoint, std::string model_id,
                               HttpClient* client, RetryPolicy retry,
                               std::string bearer_token)
    : model_id_(std::move(model_id)),
      client_(client),
      retry_(std::move(retry)),
      bearer_token_(std::move(bearer_token)) {
  while (!endpoint.empty() && endpoint.back() == '/') endpoint.pop_back();
  url_ = absl::StrCat(endpoint, "/v1/nll");
}

std::string HttpNllBackend::RequestBody(const std::string& model_id,
                                        const std::string& text) {
  ordered_json body{{"model", model_id}, {"text", text}};
  return body.dump();
}

absl::StatusOr<NllResult> HttpNllBackend::ParseResponse(
    const std::string& model_id, const std::string& text,
    const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return ProtocolViolation("response is not a JSON object");
  }
  if (!j.contains("token_nlls") || !j["token_nlls"].is_array() ||
      !j.contains("total_nll") || !j["total_nll"].is_number()) {
    return ProtocolViolation("response lacks token_nlls/total_nll");
  }
  if (j.contains("model") && j["model"].is_string() &&
      j["model"].get<std::string>() != model_id) {
    return ProtocolViolation(absl::StrCat("response is for model ",
                                          j["model"].get<std::string>()));
  }
  NllResult r;
  r.text = text;
  for (const json& v : j["token_nlls"]) {
    if (!v.is_number()) return ProtocolViolation("non-numeric token NLL");
    r.token_nlls.push_back(v.get<double>());
  }
  if (j.contains("tokens") && j["tokens"].is_array()) {
    for (const json& t : j["tokens"]) {
      if (!t.is_string()) return ProtocolViolation("non-string token");
      r.tokens.push_back(t.get<std::string>());
    }
  }
  r.total_nll = Sum(r.token_nlls);
  const double reported = j["total_nll"].get<double>();
  if (std::fabs(reported - r.total_nll) >
      kServerTotalTolerance + kTotalTolerance * std::fabs(r.total_nll)) {
    return ProtocolViolation(absl::StrCat("reported total_nll ", reported,
                                          " but tokens sum to ", r.total_nll));
  }
  MEMAUDIT_RETURN_IF_ERROR(ValidateNllResult(r));
  return r;
}

absl::StatusOr<NllResult> HttpNllBackend::Score(const std::string& text) {
  HttpHeaders headers;
  if (!bearer_token_.empty()) {
    headers.emplace("Authorization", absl::StrCat("Bearer ", bearer_token_));
  }
  const std::string body = RequestBody(model_id_, text);
  absl::StatusOr<HttpResponse> response =
      WithRetries(retry_, [&] {
        return client_->Post(url_, body, "application/json", headers);
      });
  if (!response.ok()) {
    return absl::UnavailableError(absl::StrCat(
        "likelihood provider unreachable: ", response.status().message()));
  }
  if (response->status == 200) {
    return ParseResponse(model_id_, text, response->body);
  }
  std::string message = response->body;
  json err = json::parse(response->body, nullptr, false);
  if (!err.is_discarded() && err.is_object() && err.contains("error") &&
      err["error"].is_string()) {
    message = err["error"].get<std::string>();
  }
  if (response->status == 429 || response->status >= 500) {
    return absl::UnavailableError(absl::StrCat(
        "likelihood provider returned HTTP ", response->status, ": ", message));
  }
  return absl::InvalidArgumentError(absl::StrCat(
      "likelihood provider rejected request (HTTP ", response->status,
      "): ", message));
}

absl::StatusOr<ProviderConfig> ParseProviderSpec(const std::string& spec) {
  ProviderConfig config;
  if (StartsWith(spec, "http:") && !StartsWith(spec, "http://")) {
    config.kind = ProviderConfig::Kind::kHttp;
    config.endpoint = spec.substr(5);
  } else if (StartsWith(spec, "http://") || StartsWith(spec, "https://")) {
    config.kind = ProviderConfig::Kind::kHttp;
    config.endpoint = spec;
  } else if (StartsWith(spec, "mock:")) {
    config.kind = ProviderConfig::Kind::kMock;
    config.mock_table_path = spec.substr(5);
  } else {
    return absl::InvalidArgumentError(absl::StrCat(
        "provider must be http:<url> or mock:<path>, got '", spec, "'"));
  }
  if (config.kind == ProviderConfig::Kind::kHttp && config.endpoint.empty()) {
    return absl::InvalidArgumentError("http provider needs a URL");
  }
  if (config.kind == ProviderConfig::Kind::kMock && config.mock_table_path.empty()) {
    return absl::InvalidArgumentError("mock provider needs a table path");
  }
  if (const char* token = std::getenv(kProviderTokenEnv)) {
    config.bearer_token = token;
  }
  return config;
}

LikelihoodGateway::LikelihoodGateway(std::unique_ptr<NllBackend> backend,
                                     int max_concurrent, std::string cache_path)
    : backend_(std::move(backend)),
      max_concurrent_(std::max(1, max_concurrent)),
      cache_path_(std::move(cache_path)) {}

absl::StatusOr<std::unique_ptr<LikelihoodGateway>> LikelihoodGateway::Create(
    const ProviderConfig& config, HttpClient* client) {
  if (config.max_concurrent < 1) {
    return absl::InvalidArgumentError("max_concurrent must be >= 1");
  }
  std::unique_ptr<HttpClient> owned;
  std::unique_ptr<NllBackend> backend;
  if (config.kind == ProviderConfig::Kind::kMock) {
    MEMAUDIT_ASSIGN_OR_RETURN(
        backend, MockNllBackend::FromFile(config.mock_table_path,
                                          config.model_id.empty() ? "mock"
                                                                  : config.model_id));
  } else {
    if (config.model_id.empty()) {
      return absl::InvalidArgumentError("http provider needs a model id");
    }
    if (client == nullptr) {
      owned = MakeHttpClient(config.timeout);
      client = owned.get();
    }
    backend = std::make_unique<HttpNllBackend>(
        config.endpoint, config.model_id, client, RetryPolicy{},
        config.bearer_token);
  }
  auto gateway = std::make_unique<LikelihoodGateway>(
      std::move(backend), config.max_concurrent, config.cache_path);
  gateway->owned_client_ = std::move(owned);
  MEMAUDIT_RETURN_IF_ERROR(gateway->LoadCache());
  return gateway;
}

absl::Status LikelihoodGateway::LoadCache() {
  if (cache_path_.empty()) return absl::OkStatus();
  absl::StatusOr<std::string> text = ReadFile(cache_path_);
  if (!text.ok()) {
    return absl::IsNotFound(text.status()) ? absl::OkStatus() : text.status();
  }
  std::istringstream in(*text);
  std::string line;
  int line_no = 0;
  std::lock_guard<std::mutex> lock(cache_mu_);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      // A torn final line from an interrupted run is not fatal.
      continue;
    }
    try {
      NllResult r;
      std::string model = j.at("model").get<std::string>();
      r.text = j.at("text").get<std::string>();
      r.tokens = j.value("tokens", std::vector<std::string>{});
      r.token_nlls = j.at("token_nlls").get<std::vector<double>>();
      r.total_nll = j.at("total_nll").get<double>();
      if (!ValidateNllResult(r).ok()) continue;
      cache_[CacheKey(model, r.text)] = std::move(r);
    } catch (const json::exception&) {
      continue;
    }
  }
  return absl::OkStatus();
}

size_t LikelihoodGateway::cache_size() const {
  std::lock_guard<std::mutex> lock(cache_mu_);
  return cache_.size();
}

bool LikelihoodGateway::LookupCache(const std::string& text,
                                    NllResult* out) const {
  std::lock_guard<std::mutex> lock(cache_mu_);
  auto it = cache_.find(CacheKey(backend_->model_id(), text));
  if (it == cache_.end()) return false;
  *out = it->second;
  return true;
}

void LikelihoodGateway::StoreCache(const NllResult& result) {
  const std::string model = backend_->model_id();
  std::lock_guard<std::mutex> lock(cache_mu_);
  auto [it, inserted] = cache_.emplace(CacheKey(model, result.text), result);
  if (!inserted || cache_path_.empty()) return;
  std::ofstream out(cache_path_, std::ios::app | std::ios::binary);
  out << ResultJson(model, result).dump() << '\n';
}

absl::StatusOr<NllResult> LikelihoodGateway::ScoreUpstream(
    const std::string& text) {
  if (text.empty()) return absl::InvalidArgumentError("cannot score empty text");
  ++upstream_calls_;
  MEMAUDIT_ASSIGN_OR_RETURN(NllResult result, backend_->Score(text));
  result.text = text;
  MEMAUDIT_RETURN_IF_ERROR(ValidateNllResult(result));
  return result;
}

absl::StatusOr<NllResult> LikelihoodGateway::ScoreText(const std::string& text) {
  if (text.empty()) return absl::InvalidArgumentError("cannot score empty text");
  NllResult cached;
  if (LookupCache(text, &cached)) return cached;
  MEMAUDIT_ASSIGN_OR_RETURN(NllResult result, ScoreUpstream(text));
  StoreCache(result);
  return result;
}

std::vector<absl::StatusOr<NllResult>> LikelihoodGateway::BatchScore(
    const std::vector<std::string>& texts) {
  std::vector<absl::StatusOr<NllResult>> results(
      texts.size(), absl::UnknownError("not scored"));

  // Unique texts that still need an upstream call, in first-seen order.
  std::unordered_map<std::string, size_t> slot_of;
  std::vector<std::string> pending;
  std::vector<size_t> slot_for_input(texts.size(), SIZE_MAX);
  for (size_t i = 0; i < texts.size(); ++i) {
    NllResult cached;
    if (texts[i].empty()) {
      results[i] = absl::InvalidArgumentError("cannot score empty text");
      continue;
    }
    if (LookupCache(texts[i], &cached)) {
      results[i] = std::move(cached);
      continue;
    }
    auto [it, inserted] = slot_of.emplace(texts[i], pending.size());
    if (inserted) pending.push_back(texts[i]);
    slot_for_input[i] = it->second;
  }

  std::vector<absl::StatusOr<NllResult>> fetched(
      pending.size(), absl::UnknownError("not scored"));
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t k = next++; k < pending.size(); k = next++) {
      fetched[k] = ScoreUpstream(pending[k]);
    }
  };
  const size_t workers =
      std::min(pending.size(), static_cast<size_t>(max_concurrent_));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }
  for (const auto& r : fetched) {
    if (r.ok()) StoreCache(*r);
  }
  for (size_t i = 0; i < texts.size(); ++i) {
    if (slot_for_input[i] != SIZE_MAX) results[i] = fetched[slot_for_input[i]];
  }
  return results;
}

}  // namespace memaudit
