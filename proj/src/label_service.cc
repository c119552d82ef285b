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

#include "memaudit/label_service.h"

#include <chrono>
#include <future>
#include <set>
#include <unordered_set>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "json.hpp"
#include "memaudit/file_util.h"
#include "memaudit/status_macros.h"
#include "memaudit/text.h"

namespace memaudit {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

int64_t WallClockSeconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

LabelCache::LabelCache(const LabelCache& other) {
  std::lock_guard<std::mutex> lock(other.mu_);
  path_ = other.path_;
  entries_ = other.entries_;
}

LabelCache& LabelCache::operator=(const LabelCache& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  path_ = other.path_;
  entries_ = other.entries_;
  return *this;
}

LabelCache::LabelCache(LabelCache&& other) noexcept {
  std::lock_guard<std::mutex> lock(other.mu_);
  path_ = std::move(other.path_);
  entries_ = std::move(other.entries_);
}

LabelCache& LabelCache::operator=(LabelCache&& other) noexcept {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  path_ = std::move(other.path_);
  entries_ = std::move(other.entries_);
  return *this;
}

absl::StatusOr<LabelCache> LabelCache::Load(const std::string& path) {
  absl::StatusOr<std::string> text = ReadFile(path);
  if (!text.ok()) {
    if (absl::IsNotFound(text.status())) return LabelCache(path);
    return text.status();
  }
  return FromJson(*text, path);
}

absl::Status LabelCache::Save() const {
  if (path_.empty()) return absl::FailedPreconditionError("cache has no path");
  return WriteFile(path_, ToJson());
}

std::optional<CachedLabel> LabelCache::Lookup(const std::string& qid) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = entries_.find(qid);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void LabelCache::Insert(const std::string& qid, CachedLabel entry) {
  std::lock_guard<std::mutex> lock(mu_);
  entries_[qid] = std::move(entry);
}

size_t LabelCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_.size();
}

std::string LabelCache::ToJson() const {
  std::lock_guard<std::mutex> lock(mu_);
  ordered_json root = ordered_json::object();
  for (const auto& [qid, entry] : entries_) {
    ordered_json e;
    e["label"] = entry.label ? ordered_json(*entry.label) : ordered_json(nullptr);
    e["fetched_at"] = entry.fetched_at;
    root[qid] = std::move(e);
  }
  return root.dump(2) + "\n";
}

absl::StatusOr<LabelCache> LabelCache::FromJson(const std::string& text,
                                                std::string path) {
  json root = json::parse(text, nullptr, false);
  if (root.is_discarded() || !root.is_object()) {
    return absl::InvalidArgumentError("label cache is not a JSON object");
  }
  LabelCache cache(std::move(path));
  for (const auto& [qid, e] : root.items()) {
    if (!e.is_object()) {
      return absl::InvalidArgumentError(absl::StrCat("bad cache entry ", qid));
    }
    CachedLabel entry;
    if (e.contains("label") && e["label"].is_string()) {
      entry.label = e["label"].get<std::string>();
    }
    entry.fetched_at = e.value("fetched_at", int64_t{0});
    cache.entries_[qid] = std::move(entry);
  }
  return cache;
}

LabelResolver::LabelResolver(LabelResolverOptions options, HttpClient* client,
                             LabelCache* cache)
    : options_(std::move(options)), client_(client), cache_(cache) {
  if (!options_.clock) options_.clock = WallClockSeconds;
  if (options_.batch_size == 0) options_.batch_size = 50;
  if (options_.max_concurrent < 1) options_.max_concurrent = 1;
}

std::string LabelResolver::BatchUrl(const std::vector<std::string>& qids) const {
  return absl::StrCat(options_.endpoint,
                      "?action=wbgetentities&ids=", absl::StrJoin(qids, "|"),
                      "&props=labels&languages=en&format=json");
}

absl::Status LabelResolver::FetchBatch(const std::vector<std::string>& qids) {
  const std::string url = BatchUrl(qids);
  absl::StatusOr<HttpResponse> response =
      WithRetries(options_.retry, [&]() -> absl::StatusOr<HttpResponse> {
        ++http_calls_;
        return client_->Get(url, {});
      });
  auto unresolved = [&](const std::string& why) {
    return absl::UnavailableError(absl::StrCat(
        "wbgetentities failed (", why, "); unresolved: ",
        absl::StrJoin(qids, ",")));
  };
  if (!response.ok()) return unresolved(std::string(response.status().message()));
  if (response->status != 200) {
    return unresolved(absl::StrCat("HTTP ", response->status));
  }
  json body = json::parse(response->body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    return unresolved("response is not JSON");
  }
  if (body.contains("error")) return unresolved(body["error"].dump());

  const int64_t now = options_.clock();
  const json* entities =
      body.contains("entities") ? &body["entities"] : nullptr;
  for (const std::string& qid : qids) {
    CachedLabel entry{std::nullopt, now};
    if (entities != nullptr && entities->contains(qid)) {
      const json& e = (*entities)[qid];
      if (e.contains("labels") && e["labels"].contains("en") &&
          e["labels"]["en"].contains("value") &&
          e["labels"]["en"]["value"].is_string()) {
        entry.label = e["labels"]["en"]["value"].get<std::string>();
      }
    }
    cache_->Insert(qid, std::move(entry));
  }
  return absl::OkStatus();
}

absl::StatusOr<std::map<std::string, std::string>> LabelResolver::Resolve(
    const std::vector<std::string>& qids) {
  std::vector<std::string> misses;
  std::unordered_set<std::string> seen;
  for (const std::string& qid : qids) {
    if (!seen.insert(qid).second) continue;
    if (!cache_->Lookup(qid)) misses.push_back(qid);
  }

  if (!misses.empty()) {
    if (options_.offline || client_ == nullptr) {
      return absl::NotFoundError(absl::StrCat(
          "label cache miss in offline mode: ", absl::StrJoin(misses, ",")));
    }
    std::vector<std::vector<std::string>> batches;
    for (size_t i = 0; i < misses.size(); i += options_.batch_size) {
      size_t end = std::min(misses.size(), i + options_.batch_size);
      batches.emplace_back(misses.begin() + i, misses.begin() + end);
    }
    std::vector<absl::Status> statuses(batches.size());
    const size_t step = static_cast<size_t>(options_.max_concurrent);
    for (size_t begin = 0; begin < batches.size(); begin += step) {
      size_t end = std::min(batches.size(), begin + step);
      std::vector<std::future<absl::Status>> inflight;
      for (size_t b = begin; b < end; ++b) {
        inflight.push_back(std::async(std::launch::async,
                                      [this, &batches, b] {
                                        return FetchBatch(batches[b]);
                                      }));
      }
      for (size_t b = begin; b < end; ++b) statuses[b] = inflight[b - begin].get();
    }
    std::vector<std::string> failed;
    for (const absl::Status& s : statuses) {
      if (!s.ok()) failed.emplace_back(s.message());
    }
    if (!failed.empty()) {
      return absl::UnavailableError(absl::StrJoin(failed, "; "));
    }
  }

  std::map<std::string, std::string> out;
  for (const std::string& qid : qids) {
    std::optional<CachedLabel> entry = cache_->Lookup(qid);
    if (entry && entry->label) out[qid] = *entry->label;
  }
  return out;
}

uint64_t UniformBelow(std::mt19937_64& engine, uint64_t bound) {
  if (bound <= 1) return 0;
  // Reject the low values that would make the modulo biased.
  const uint64_t threshold = (0 - bound) % bound;
  while (true) {
    uint64_t r = engine();
    if (r >= threshold) return r % bound;
  }
}

std::vector<size_t> SeededPermutation(size_t n, uint64_t seed) {
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 engine(seed);
  for (size_t i = n; i > 1; --i) {
    size_t j = static_cast<size_t>(UniformBelow(engine, i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

absl::StatusOr<CounterfactualSet> SampleCounterfactuals(
    const PairSample& pairs, size_t n, uint64_t seed,
    const LabelLookup& lookup) {
  CounterfactualSet out;
  out.pid = pairs.pid;
  out.seed = seed;
  std::vector<HumanValuePair> unique = DeduplicateByHuman(pairs.pairs);
  std::vector<size_t> order = SeededPermutation(unique.size(), seed);

  std::set<std::string> seen_values;
  size_t next = 0;
  while (out.value_cfs.size() < n && next < order.size()) {
    size_t want = n - out.value_cfs.size();
    size_t end = std::min(order.size(), next + want);
    std::vector<std::string> qids;
    for (size_t k = next; k < end; ++k) qids.push_back(unique[order[k]].value_qid);
    MEMAUDIT_ASSIGN_OR_RETURN(auto labels, lookup(qids));
    for (size_t k = next; k < end; ++k) {
      const HumanValuePair& pair = unique[order[k]];
      auto it = labels.find(pair.value_qid);
      if (it == labels.end()) continue;
      std::string normalized = NormalizeWhitespace(it->second);
      if (normalized.empty() || !seen_values.insert(normalized).second) continue;
      out.human_cfs.push_back(pair.human);
      out.value_cfs.push_back(normalized);
    }
    next = end;
  }
  out.undersized = out.value_cfs.size() < n;
  return out;
}

std::string CounterfactualsToJson(const std::vector<CounterfactualSet>& sets) {
  std::map<std::string, const CounterfactualSet*> by_pid;
  for (const CounterfactualSet& s : sets) by_pid[s.pid] = &s;
  ordered_json root = ordered_json::object();
  for (const auto& [pid, s] : by_pid) {
    root[pid] = ordered_json{{"human_cfs", s->human_cfs},
                             {"value_cfs", s->value_cfs},
                             {"seed", s->seed},
                             {"undersized", s->undersized}};
  }
  return root.dump(2) + "\n";
}

absl::StatusOr<std::map<std::string, CounterfactualSet>> CounterfactualsFromJson(
    const std::string& text) {
  json root = json::parse(text, nullptr, false);
  if (root.is_discarded() || !root.is_object()) {
    return absl::InvalidArgumentError("counterfactuals file is not an object");
  }
  std::map<std::string, CounterfactualSet> out;
  for (const auto& [pid, body] : root.items()) {
    if (!body.is_object() || !body.contains("value_cfs") ||
        !body["value_cfs"].is_array()) {
      return absl::InvalidArgumentError(
          absl::StrCat("counterfactual entry ", pid, " lacks value_cfs"));
    }
    CounterfactualSet s;
    s.pid = pid;
    try {
      s.value_cfs = body["value_cfs"].get<std::vector<std::string>>();
      if (body.contains("human_cfs")) {
        s.human_cfs = body["human_cfs"].get<std::vector<std::string>>();
      }
      s.seed = body.value("seed", uint64_t{0});
      s.undersized = body.value("undersized", false);
    } catch (const json::exception& e) {
      return absl::InvalidArgumentError(
          absl::StrCat("counterfactual entry ", pid, ": ", e.what()));
    }
    out[pid] = std::move(s);
  }
  return out;
}

}  // namespace memaudit
