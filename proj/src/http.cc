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

#include "memaudit/http.h"

#include <thread>

#include "absl/strings/str_cat.h"
#include "httplib.h"

namespace memaudit {
namespace {

class HttplibClient : public HttpClient {
 public:
  explicit HttplibClient(std::chrono::milliseconds timeout)
      : timeout_(timeout) {}

  absl::StatusOr<HttpResponse> Get(const std::string& url,
                                   const HttpHeaders& headers) override {
    absl::StatusOr<ParsedUrl> parsed = ParseUrl(url);
    if (!parsed.ok()) return parsed.status();
    httplib::Client client(parsed->scheme_host_port);
    Configure(client);
    httplib::Headers h(headers.begin(), headers.end());
    return Convert(client.Get(parsed->path, h), url);
  }

  absl::StatusOr<HttpResponse> Post(const std::string& url,
                                    const std::string& body,
                                    const std::string& content_type,
                                    const HttpHeaders& headers) override {
    absl::StatusOr<ParsedUrl> parsed = ParseUrl(url);
    if (!parsed.ok()) return parsed.status();
    httplib::Client client(parsed->scheme_host_port);
    Configure(client);
    httplib::Headers h(headers.begin(), headers.end());
    return Convert(client.Post(parsed->path, h, body, content_type), url);
  }

 private:
  void Configure(httplib::Client& client) const {
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(
        timeout_ - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    client.set_follow_location(true);
  }

  static absl::StatusOr<HttpResponse> Convert(const httplib::Result& result,
                                              const std::string& url) {
    if (!result) {
      return absl::UnavailableError(absl::StrCat(
          "request to ", url, " failed: ", httplib::to_string(result.error())));
    }
    return HttpResponse{result->status, result->body};
  }

  std::chrono::milliseconds timeout_;
};

}  // namespace

std::unique_ptr<HttpClient> MakeHttpClient(std::chrono::milliseconds timeout) {
  return std::make_unique<HttplibClient>(timeout);
}

absl::StatusOr<ParsedUrl> ParseUrl(const std::string& url) {
  size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    return absl::InvalidArgumentError(absl::StrCat("URL without scheme: ", url));
  }
  std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    return absl::InvalidArgumentError(absl::StrCat("unsupported scheme: ", url));
  }
  size_t path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  if (path_start == std::string::npos) {
    size_t query = url.find('?', scheme_end + 3);
    out.scheme_host_port = url.substr(0, query);
    out.path = query == std::string::npos ? "/" : "/" + url.substr(query);
  } else {
    out.scheme_host_port = url.substr(0, path_start);
    out.path = url.substr(path_start);
  }
  if (out.scheme_host_port.size() <= scheme_end + 3) {
    return absl::InvalidArgumentError(absl::StrCat("URL without host: ", url));
  }
  return out;
}

Sleeper RealSleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

bool IsRetryable(const absl::StatusOr<HttpResponse>& response) {
  if (!response.ok()) {
    return absl::IsUnavailable(response.status()) ||
           absl::IsDeadlineExceeded(response.status());
  }
  return response->status == 429 || response->status >= 500;
}

absl::StatusOr<HttpResponse> WithRetries(
    const RetryPolicy& policy,
    const std::function<absl::StatusOr<HttpResponse>()>& attempt) {
  absl::StatusOr<HttpResponse> result = attempt();
  for (std::chrono::milliseconds delay : policy.backoff) {
    if (!IsRetryable(result)) return result;
    if (policy.sleep) policy.sleep(delay);
    result = attempt();
  }
  return result;
}

}  // namespace memaudit
