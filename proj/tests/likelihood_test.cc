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

#include <algorithm>
#include <filesystem>
#include <random>
#include <thread>

#include "gtest/gtest.h"
#include "httplib.h"
#include "json.hpp"
#include "memaudit/file_util.h"

namespace memaudit {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Counts calls that reach the backend.
class CountingBackend : public NllBackend {
 public:
  explicit CountingBackend(MockNllBackend::Table table, std::string model = "mock")
      : inner_(std::move(table), std::move(model)) {}
  absl::StatusOr<NllResult> Score(const std::string& text) override {
    ++calls;
    return inner_.Score(text);
  }
  std::string model_id() const override { return inner_.model_id(); }
  MockNllBackend& inner() { return inner_; }
  std::atomic<int> calls{0};

 private:
  MockNllBackend inner_;
};

std::string TempPath(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "memaudit_likelihood_test";
  fs::create_directories(dir);
  fs::path p = dir / name;
  fs::remove(p);
  return p.string();
}

TEST(MockTest, TableLookup) {
  MockNllBackend mock({{"abc", {0.5, 1.5}}, {"xyz", {1.0, 2.0, 3.0}}});
  EXPECT_DOUBLE_EQ(mock.Score("abc")->total_nll, 2.0);
  EXPECT_DOUBLE_EQ(mock.Score("xyz")->total_nll, 6.0);
  EXPECT_EQ(mock.Score("nope").status().code(), absl::StatusCode::kNotFound);
}

TEST(MockTest, FromFile) {
  const std::string path = TempPath("table.json");
  ASSERT_TRUE(WriteFile(path, R"({"abc": [0.5, 1.5], "Zoë": [2]})").ok());
  auto mock = MockNllBackend::FromFile(path);
  ASSERT_TRUE(mock.ok());
  EXPECT_DOUBLE_EQ((*mock)->Score("Zoë")->total_nll, 2.0);
  ASSERT_TRUE(WriteFile(path, R"({"abc": "x"})").ok());
  EXPECT_EQ(MockNllBackend::FromFile(path).status().code(),
            absl::StatusCode::kInvalidArgument);
}

TEST(ValidateTest, Rules) {
  EXPECT_TRUE(ValidateNllResult({"a", {}, {1.0, 2.0}, 3.0}).ok());
  EXPECT_TRUE(ValidateNllResult({"a", {"x", "y"}, {1.0, 2.0}, 3.0}).ok());
  EXPECT_FALSE(ValidateNllResult({"a", {}, {}, 0.0}).ok());
  EXPECT_FALSE(ValidateNllResult({"a", {"x"}, {1.0, 2.0}, 3.0}).ok());
  EXPECT_FALSE(ValidateNllResult({"a", {}, {1.0, -0.5}, 0.5}).ok());
  EXPECT_FALSE(ValidateNllResult({"a", {}, {1.0, 2.0}, 3.1}).ok());
  EXPECT_FALSE(ValidateNllResult({"a", {}, {NAN}, NAN}).ok());
}

TEST(GatewayTest, CachesScores) {
  auto backend = std::make_unique<CountingBackend>(MockNllBackend::Table{{"abc", {0.5, 1.5}}});
  CountingBackend* raw = backend.get();
  LikelihoodGateway g(std::move(backend));
  auto a = g.ScoreText("abc");
  auto b = g.ScoreText("abc");
  ASSERT_TRUE(a.ok());
  EXPECT_EQ(*a, *b);
  EXPECT_EQ(raw->calls.load(), 1);
  EXPECT_EQ(g.upstream_calls(), 1);
  EXPECT_EQ(g.ScoreText("").status().code(), absl::StatusCode::kInvalidArgument);
}

TEST(GatewayTest, NegativeNllIsViolation) {
  LikelihoodGateway g(std::make_unique<MockNllBackend>(
      MockNllBackend::Table{{"bad", {0.5, -0.1}}}));
  auto r = g.ScoreText("bad");
  EXPECT_FALSE(r.ok());
  EXPECT_NE(r.status().message().find("protocol violation"), absl::string_view::npos);
  EXPECT_EQ(g.cache_size(), 0u);
}

TEST(GatewayTest, BatchDedup) {
  auto backend = std::make_unique<CountingBackend>(
      MockNllBackend::Table{{"t1", {1.0}}, {"t2", {2.0}}});
  CountingBackend* raw = backend.get();
  LikelihoodGateway g(std::move(backend));
  auto out = g.BatchScore({"t1", "t2", "t1"});
  ASSERT_EQ(out.size(), 3u);
  EXPECT_DOUBLE_EQ(out[0]->total_nll, 1.0);
  EXPECT_DOUBLE_EQ(out[1]->total_nll, 2.0);
  EXPECT_EQ(*out[0], *out[2]);
  EXPECT_LE(raw->calls.load(), 2);
  EXPECT_TRUE(g.BatchScore({}).empty());
}

TEST(GatewayTest, PartialFailuresPerItem) {
  LikelihoodGateway g(std::make_unique<MockNllBackend>(
      MockNllBackend::Table{{"t1", {1.0}}}));
  auto out = g.BatchScore({"t1", "missing", "", "t1"});
  ASSERT_EQ(out.size(), 4u);
  EXPECT_TRUE(out[0].ok());
  EXPECT_EQ(out[1].status().code(), absl::StatusCode::kNotFound);
  EXPECT_EQ(out[2].status().code(), absl::StatusCode::kInvalidArgument);
  EXPECT_TRUE(out[3].ok());
}

TEST(GatewayTest, OrderSurvivesShuffledCompletion) {
  MockNllBackend::Table table;
  std::vector<std::string> texts;
  for (int i = 0; i < 64; ++i) {
    std::string t = "text " + std::to_string(i);
    table[t] = {static_cast<double>(i), 0.25};
    texts.push_back(t);
  }
  auto mock = std::make_unique<MockNllBackend>(table);
  // Earlier texts sleep longer so completion runs roughly backwards.
  mock->set_before_score([](const std::string& text) {
    int i = std::stoi(text.substr(5));
    std::this_thread::sleep_for(std::chrono::microseconds((64 - i) * 200));
  });
  LikelihoodGateway g(std::move(mock), 8);
  std::mt19937 rng(3);
  std::shuffle(texts.begin(), texts.end(), rng);
  auto out = g.BatchScore(texts);
  ASSERT_EQ(out.size(), texts.size());
  for (size_t i = 0; i < texts.size(); ++i) {
    ASSERT_TRUE(out[i].ok());
    EXPECT_EQ(out[i]->text, texts[i]);
    EXPECT_DOUBLE_EQ(out[i]->total_nll, table[texts[i]][0] + 0.25);
  }
}

TEST(GatewayTest, PersistentCacheWarmRun) {
  const std::string cache = TempPath("nll_cache.jsonl");
  MockNllBackend::Table table{{"a", {0.1, 0.2}}, {"b", {3.0}}, {"Zoë \"q\"", {1.0}}};
  std::vector<std::string> texts = {"a", "b", "Zoë \"q\"", "a"};

  auto cold_backend = std::make_unique<CountingBackend>(table);
  LikelihoodGateway cold(std::move(cold_backend), 4, cache);
  ASSERT_TRUE(cold.LoadCache().ok());
  auto first = cold.BatchScore(texts);
  EXPECT_EQ(cold.upstream_calls(), 3);

  auto warm_backend = std::make_unique<CountingBackend>(table);
  CountingBackend* raw = warm_backend.get();
  LikelihoodGateway warm(std::move(warm_backend), 4, cache);
  ASSERT_TRUE(warm.LoadCache().ok());
  EXPECT_EQ(warm.cache_size(), 3u);
  auto second = warm.BatchScore(texts);
  EXPECT_EQ(raw->calls.load(), 0);
  for (size_t i = 0; i < texts.size(); ++i) {
    ASSERT_TRUE(second[i].ok());
    EXPECT_EQ(NllResultToJson(*first[i]), NllResultToJson(*second[i]));
  }

  // Entries are keyed by model id too.
  LikelihoodGateway other(std::make_unique<CountingBackend>(table, "other"), 4, cache);
  ASSERT_TRUE(other.LoadCache().ok());
  other.BatchScore(texts);
  EXPECT_EQ(other.upstream_calls(), 3);
}

TEST(GatewayTest, TornCacheLineIgnored) {
  const std::string cache = TempPath("torn.jsonl");
  ASSERT_TRUE(WriteFile(cache,
                        "{\"model\":\"mock\",\"text\":\"a\",\"tokens\":[],"
                        "\"token_nlls\":[1.0],\"total_nll\":1.0}\n{\"model\":\"mo")
                  .ok());
  LikelihoodGateway g(std::make_unique<MockNllBackend>(MockNllBackend::Table{}), 1, cache);
  ASSERT_TRUE(g.LoadCache().ok());
  EXPECT_EQ(g.cache_size(), 1u);
  EXPECT_DOUBLE_EQ(g.ScoreText("a")->total_nll, 1.0);
}

TEST(ProviderSpecTest, Forms) {
  auto http = ParseProviderSpec("http:http://localhost:8000");
  ASSERT_TRUE(http.ok());
  EXPECT_EQ(http->kind, ProviderConfig::Kind::kHttp);
  EXPECT_EQ(http->endpoint, "http://localhost:8000");
  EXPECT_EQ(ParseProviderSpec("https://h.example")->endpoint, "https://h.example");
  auto mock = ParseProviderSpec("mock:/tmp/t.json");
  ASSERT_TRUE(mock.ok());
  EXPECT_EQ(mock->kind, ProviderConfig::Kind::kMock);
  EXPECT_EQ(mock->mock_table_path, "/tmp/t.json");
  EXPECT_FALSE(ParseProviderSpec("mock:").ok());
  EXPECT_FALSE(ParseProviderSpec("grpc:x").ok());
  EXPECT_FALSE(ParseProviderSpec("http:").ok());
}

TEST(ParseResponseTest, Checks) {
  auto ok = HttpNllBackend::ParseResponse(
      "m", "hi",
      R"({"model":"m","tokens":["h","i"],"token_nlls":[1.5,0.25],"total_nll":1.75004})");
  ASSERT_TRUE(ok.ok()) << ok.status();
  EXPECT_DOUBLE_EQ(ok->total_nll, 1.75);
  EXPECT_EQ(ok->tokens, (std::vector<std::string>{"h", "i"}));
  EXPECT_FALSE(HttpNllBackend::ParseResponse(
                   "m", "hi", R"({"model":"m","token_nlls":[1.5],"total_nll":1.6})")
                   .ok());
  EXPECT_FALSE(HttpNllBackend::ParseResponse(
                   "m", "hi", R"({"model":"n","token_nlls":[1.5],"total_nll":1.5})")
                   .ok());
  EXPECT_FALSE(HttpNllBackend::ParseResponse("m", "hi", "[]").ok());
  EXPECT_FALSE(HttpNllBackend::ParseResponse(
                   "m", "hi", R"({"token_nlls":[-1.5],"total_nll":-1.5})")
                   .ok());
  EXPECT_EQ(json::parse(HttpNllBackend::RequestBody("m", "Zoë")),
            (json{{"model", "m"}, {"text", "Zoë"}}));
}

// A local server speaking the wire protocol.
class NllServer {
 public:
  NllServer() {
    server_.Post("/v1/nll", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      auth = req.get_header_value("Authorization");
      if (throttle > 0) {
        --throttle;
        res.status = 429;
        res.set_content(R"({"error":"slow down"})", "application/json");
        return;
      }
      json body = json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.contains("text") || body["text"] == "") {
        res.status = 400;
        res.set_content(R"({"error":"text must be non-empty"})", "application/json");
        return;
      }
      std::string text = body["text"];
      std::string model = reply_model.empty() ? body["model"].get<std::string>() : reply_model;
      json tokens = json::array();
      json nlls = json::array();
      double total = 0;
      for (char c : text) {
        tokens.push_back(std::string(1, c));
        nlls.push_back(0.5);
        total += 0.5;
      }
      res.set_content(json{{"model", model}, {"tokens", tokens},
                           {"token_nlls", nlls}, {"total_nll", total}}.dump(),
                      "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~NllServer() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

  std::atomic<int> hits{0};
  std::atomic<int> throttle{0};
  std::string auth;
  std::string reply_model;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

RetryPolicy NoWait(std::vector<std::chrono::milliseconds>* slept) {
  RetryPolicy p;
  p.sleep = [slept](std::chrono::milliseconds d) { slept->push_back(d); };
  return p;
}

TEST(HttpBackendTest, RoundTrip) {
  NllServer server;
  auto client = MakeHttpClient(std::chrono::seconds(5));
  std::vector<std::chrono::milliseconds> slept;
  HttpNllBackend backend(server.endpoint() + "/", "tiny", client.get(), NoWait(&slept),
                         "s3cret");
  auto r = backend.Score("abcd");
  ASSERT_TRUE(r.ok()) << r.status();
  EXPECT_DOUBLE_EQ(r->total_nll, 2.0);
  EXPECT_EQ(r->tokens.size(), 4u);
  EXPECT_EQ(server.auth, "Bearer s3cret");
  EXPECT_TRUE(slept.empty());
}

TEST(HttpBackendTest, BadRequestCarriesMessage) {
  NllServer server;
  auto client = MakeHttpClient(std::chrono::seconds(5));
  std::vector<std::chrono::milliseconds> slept;
  HttpNllBackend backend(server.endpoint(), "tiny", client.get(), NoWait(&slept));
  auto r = backend.Score("");
  EXPECT_EQ(r.status().code(), absl::StatusCode::kInvalidArgument);
  EXPECT_NE(r.status().message().find("text must be non-empty"), absl::string_view::npos);
  EXPECT_EQ(server.hits.load(), 1);
}

TEST(HttpBackendTest, ThrottledThenServed) {
  NllServer server;
  server.throttle = 2;
  auto client = MakeHttpClient(std::chrono::seconds(5));
  std::vector<std::chrono::milliseconds> slept;
  HttpNllBackend backend(server.endpoint(), "tiny", client.get(), NoWait(&slept));
  auto r = backend.Score("ab");
  ASSERT_TRUE(r.ok()) << r.status();
  EXPECT_EQ(server.hits.load(), 3);
  EXPECT_EQ(slept, (std::vector<std::chrono::milliseconds>{std::chrono::seconds(1),
                                                           std::chrono::seconds(4)}));
}

TEST(HttpBackendTest, ThrottledForever) {
  NllServer server;
  server.throttle = 100;
  auto client = MakeHttpClient(std::chrono::seconds(5));
  std::vector<std::chrono::milliseconds> slept;
  HttpNllBackend backend(server.endpoint(), "tiny", client.get(), NoWait(&slept));
  EXPECT_EQ(backend.Score("ab").status().code(), absl::StatusCode::kUnavailable);
  EXPECT_EQ(server.hits.load(), 4);
}

TEST(HttpBackendTest, ModelMismatch) {
  NllServer server;
  server.reply_model = "someone-else";
  auto client = MakeHttpClient(std::chrono::seconds(5));
  std::vector<std::chrono::milliseconds> slept;
  HttpNllBackend backend(server.endpoint(), "tiny", client.get(), NoWait(&slept));
  auto r = backend.Score("ab");
  EXPECT_FALSE(r.ok());
  EXPECT_NE(r.status().message().find("someone-else"), absl::string_view::npos);
}

TEST(HttpBackendTest, ConnectionRefused) {
  auto client = MakeHttpClient(std::chrono::seconds(1));
  std::vector<std::chrono::milliseconds> slept;
  // Port 1 on loopback is essentially never listening.
  HttpNllBackend backend("http://127.0.0.1:1", "tiny", client.get(), NoWait(&slept));
  EXPECT_EQ(backend.Score("ab").status().code(), absl::StatusCode::kUnavailable);
  EXPECT_EQ(slept.size(), 3u);
}

TEST(HttpBackendTest, GatewayOverHttp) {
  NllServer server;
  ProviderConfig config;
  config.kind = ProviderConfig::Kind::kHttp;
  config.endpoint = server.endpoint();
  config.model_id = "tiny";
  config.max_concurrent = 3;
  auto g = LikelihoodGateway::Create(config);
  ASSERT_TRUE(g.ok()) << g.status();
  std::vector<std::string> texts;
  for (int i = 0; i < 20; ++i) texts.push_back(std::string(i % 7 + 1, 'x'));
  auto out = (*g)->BatchScore(texts);
  for (size_t i = 0; i < texts.size(); ++i) {
    ASSERT_TRUE(out[i].ok()) << out[i].status();
    EXPECT_DOUBLE_EQ(out[i]->total_nll, 0.5 * texts[i].size());
  }
  EXPECT_EQ(server.hits.load(), 7);
}

}  // namespace
}  // namespace memaudit
