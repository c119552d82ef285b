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

#ifndef MEMAUDIT_LIKELIHOOD_H_
#define MEMAUDIT_LIKELIHOOD_H_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "memaudit/http.h"

namespace memaudit {

// Negative log-likelihood of a text under a causal LM, in nats.
struct NllResult {
  std::string text;
  std::vector<std::string> tokens;  // may be empty for table providers
  std::vector<double> token_nlls;
  double total_nll = 0.0;

  friend bool operator==(const NllResult&, const NllResult&) = default;
};

// Token count >= 1, every token NLL finite and non-negative (a negative
// NLL is a positive log-probability), tokens empty or aligned with the
// NLLs, and total_nll equal to the sum within 1e-6.
absl::Status ValidateNllResult(const NllResult& result);

std::string NllResultToJson(const NllResult& result);

// Anything that can score one text. Implementations must tolerate
// concurrent calls.
class NllBackend {
 public:
  virtual ~NllBackend() = default;
  virtual absl::StatusOr<NllResult> Score(const std::string& text) = 0;
  virtual std::string model_id() const = 0;
};

// Deterministic provider backed by a text -> token NLL table.
class MockNllBackend : public NllBackend {
 public:
  using Table = std::map<std::string, std::vector<double>>;

  MockNllBackend(Table table, std::string model_id = "mock");

  // JSON object mapping text to an array of token NLLs.
  static absl::StatusOr<std::unique_ptr<MockNllBackend>> FromFile(
      const std::string& path, std::string model_id = "mock");

  absl::StatusOr<NllResult> Score(const std::string& text) override;
  std::string model_id() const override { return model_id_; }

  // Called before each lookup; tests use it to perturb completion order.
  void set_before_score(std::function<void(const std::string&)> hook) {
    before_score_ = std::move(hook);
  }

 private:
  Table table_;
  std::string model_id_;
  std::function<void(const std::string&)> before_score_;
};

// Client for the POST {endpoint}/v1/nll protocol.
class HttpNllBackend : public NllBackend {
 public:
  // `client` is not owned.
  HttpNllBackend(std::string endpoint, std::string model_id,
                 HttpClient* client, RetryPolicy retry = {},
                 std::string bearer_token = "");

  absl::StatusOr<NllResult> Score(const std::string& text) override;
  std::string model_id() const override { return model_id_; }

  static std::string RequestBody(const std::string& model_id,
                                 const std::string& text);
  // Parses and checks a 200 response body against the request.
  static absl::StatusOr<NllResult> ParseResponse(const std::string& model_id,
                                                 const std::string& text,
                                                 const std::string& body);

 private:
  std::string url_;
  std::string model_id_;
  HttpClient* client_;
  RetryPolicy retry_;
  std::string bearer_token_;
};

struct ProviderConfig {
  enum class Kind { kHttp, kMock };
  Kind kind = Kind::kMock;
  std::string endpoint;          // kHttp
  std::string mock_table_path;   // kMock
  std::string model_id;
  int max_concurrent = 4;
  std::chrono::milliseconds timeout = std::chrono::seconds(120);
  std::string cache_path;        // optional persistent cache (JSONL)
  std::string bearer_token;
};

// "http:<url>" or "mock:<path>".
absl::StatusOr<ProviderConfig> ParseProviderSpec(const std::string& spec);

inline constexpr char kProviderTokenEnv[] = "AUDIT_PROVIDER_TOKEN";

// Caching, deduplicating, concurrency-bounded front end over a backend.
// Results are keyed by (model id, text); once a text has been scored it is
// never sent upstream again, including across runs when a cache file is
// configured.
class LikelihoodGateway {
 public:
  LikelihoodGateway(std::unique_ptr<NllBackend> backend, int max_concurrent = 4,
                    std::string cache_path = "");

  // Builds the backend described by `config`. For http providers a null
  // `client` makes the gateway create and own one; otherwise it is
  // borrowed.
  static absl::StatusOr<std::unique_ptr<LikelihoodGateway>> Create(
      const ProviderConfig& config, HttpClient* client = nullptr);

  // Loads previously persisted results. Called by Create.
  absl::Status LoadCache();

  absl::StatusOr<NllResult> ScoreText(const std::string& text);

  // One result per input, in input order. Duplicate texts are sent
  // upstream once. Failures are reported per item.
  std::vector<absl::StatusOr<NllResult>> BatchScore(
      const std::vector<std::string>& texts);

  int64_t upstream_calls() const { return upstream_calls_.load(); }
  std::string model_id() const { return backend_->model_id(); }
  size_t cache_size() const;

 private:
  absl::StatusOr<NllResult> ScoreUpstream(const std::string& text);
  bool LookupCache(const std::string& text, NllResult* out) const;
  void StoreCache(const NllResult& result);

  std::unique_ptr<HttpClient> owned_client_;
  std::unique_ptr<NllBackend> backend_;
  int max_concurrent_;
  std::string cache_path_;
  mutable std::mutex cache_mu_;
  std::map<std::string, NllResult> cache_;  // key: model id + '\x1f' + text
  std::atomic<int64_t> upstream_calls_{0};
};

}  // namespace memaudit

#endif  // MEMAUDIT_LIKELIHOOD_H_
