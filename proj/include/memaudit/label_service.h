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

#ifndef MEMAUDIT_LABEL_SERVICE_H_
#define MEMAUDIT_LABEL_SERVICE_H_

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "memaudit/http.h"
#include "memaudit/ingest.h"

namespace memaudit {

struct CachedLabel {
  std::optional<std::string> label;  // nullopt: entity has no English label
  int64_t fetched_at = 0;            // unix seconds

  friend bool operator==(const CachedLabel&, const CachedLabel&) = default;
};

// qid -> English label, optionally persisted as a JSON file. Thread-safe.
class LabelCache {
 public:
  LabelCache() = default;
  explicit LabelCache(std::string path) : path_(std::move(path)) {}

  // Reads `path` if it exists; a missing file is an empty cache.
  static absl::StatusOr<LabelCache> Load(const std::string& path);

  absl::Status Save() const;

  std::optional<CachedLabel> Lookup(const std::string& qid) const;
  void Insert(const std::string& qid, CachedLabel entry);
  size_t size() const;
  const std::string& path() const { return path_; }

  std::string ToJson() const;
  static absl::StatusOr<LabelCache> FromJson(const std::string& text,
                                             std::string path = "");

  LabelCache(const LabelCache& other);
  LabelCache& operator=(const LabelCache& other);
  LabelCache(LabelCache&& other) noexcept;
  LabelCache& operator=(LabelCache&& other) noexcept;

 private:
  std::string path_;
  mutable std::mutex mu_;
  std::map<std::string, CachedLabel> entries_;
};

struct LabelResolverOptions {
  std::string endpoint = "https://www.wikidata.org/w/api.php";
  bool offline = false;  // cache only; a miss is an error
  size_t batch_size = 50;
  int max_concurrent = 4;
  RetryPolicy retry;
  std::function<int64_t()> clock;  // defaults to wall-clock seconds
};

// Resolves entity ids to English labels through wbgetentities, consulting
// and filling a LabelCache first.
class LabelResolver {
 public:
  // `client` may be null in offline mode. Neither pointer is owned.
  LabelResolver(LabelResolverOptions options, HttpClient* client,
                LabelCache* cache);

  // Labels for the ids that have one. Ids without an English label are
  // absent from the map, not errors.
  absl::StatusOr<std::map<std::string, std::string>> Resolve(
      const std::vector<std::string>& qids);

  int64_t http_calls() const { return http_calls_.load(); }

  std::string BatchUrl(const std::vector<std::string>& qids) const;

 private:
  absl::Status FetchBatch(const std::vector<std::string>& qids);

  LabelResolverOptions options_;
  HttpClient* client_;
  LabelCache* cache_;
  std::atomic<int64_t> http_calls_{0};
};

// Portable bounded draw from a 64-bit Mersenne Twister. The standard
// distributions are implementation-defined, which would make datasets
// differ between standard libraries.
uint64_t UniformBelow(std::mt19937_64& engine, uint64_t bound);

// Seeded Fisher-Yates permutation of 0..n-1.
std::vector<size_t> SeededPermutation(size_t n, uint64_t seed);

struct CounterfactualSet {
  std::string pid;
  std::vector<std::string> human_cfs;
  std::vector<std::string> value_cfs;
  uint64_t seed = 0;
  bool undersized = false;

  friend bool operator==(const CounterfactualSet&,
                         const CounterfactualSet&) = default;
};

using LabelLookup = std::function<absl::StatusOr<
    std::map<std::string, std::string>>(const std::vector<std::string>&)>;

// Shuffles the deduplicated pairs under `seed` and walks them in order,
// keeping pairs whose value label resolves and is not already present
// (after whitespace normalization) until `n` are selected. Fewer than `n`
// usable pairs marks the set undersized.
absl::StatusOr<CounterfactualSet> SampleCounterfactuals(
    const PairSample& pairs, size_t n, uint64_t seed,
    const LabelLookup& lookup);

// counterfactuals.json: pid -> {"human_cfs", "value_cfs", "seed",
// "undersized"}, pids sorted.
std::string CounterfactualsToJson(const std::vector<CounterfactualSet>& sets);
absl::StatusOr<std::map<std::string, CounterfactualSet>> CounterfactualsFromJson(
    const std::string& text);

}  // namespace memaudit

#endif  // MEMAUDIT_LABEL_SERVICE_H_
