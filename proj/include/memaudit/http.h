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

#ifndef MEMAUDIT_HTTP_H_
#define MEMAUDIT_HTTP_H_

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace memaudit {

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::multimap<std::string, std::string>;

// Minimal blocking HTTP interface. Implementations must be safe to call
// from several threads at once. Transport failures (connection refused,
// timeouts) come back as UNAVAILABLE; any HTTP status is a response.
class HttpClient {
 public:
  virtual ~HttpClient() = default;

  virtual absl::StatusOr<HttpResponse> Get(const std::string& url,
                                           const HttpHeaders& headers) = 0;
  virtual absl::StatusOr<HttpResponse> Post(const std::string& url,
                                            const std::string& body,
                                            const std::string& content_type,
                                            const HttpHeaders& headers) = 0;
};

// cpp-httplib backed client; http and https URLs.
std::unique_ptr<HttpClient> MakeHttpClient(
    std::chrono::milliseconds timeout = std::chrono::seconds(60));

struct ParsedUrl {
  std::string scheme_host_port;  // "https://host:443"
  std::string path;              // "/w/api.php?x=y", at least "/"
};

absl::StatusOr<ParsedUrl> ParseUrl(const std::string& url);

// Waits between attempts. The default sleeps; tests substitute a recorder.
using Sleeper = std::function<void(std::chrono::milliseconds)>;

Sleeper RealSleeper();

struct RetryPolicy {
  // One retry per entry: the first call plus backoff.size() retries.
  std::vector<std::chrono::milliseconds> backoff = {
      std::chrono::seconds(1), std::chrono::seconds(4),
      std::chrono::seconds(16)};
  Sleeper sleep = RealSleeper();
};

// 429, 5xx and transport failures are retryable; other statuses are final.
bool IsRetryable(const absl::StatusOr<HttpResponse>& response);

// Calls `attempt` until it returns a non-retryable result or the policy is
// exhausted, then returns the last result.
absl::StatusOr<HttpResponse> WithRetries(
    const RetryPolicy& policy,
    const std::function<absl::StatusOr<HttpResponse>()>& attempt);

}  // namespace memaudit

#endif  // MEMAUDIT_HTTP_H_
