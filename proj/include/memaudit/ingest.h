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

#ifndef MEMAUDIT_INGEST_H_
#define MEMAUDIT_INGEST_H_

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "memaudit/wikidata.h"

namespace memaudit {

inline constexpr std::string_view kInstanceOf = "P31";
inline constexpr std::string_view kHumanClass = "Q5";

// True iff some P31 claim references Q5.
bool IsHuman(const EntityRecord& entity);

// Keeps the catalog entries whose datatype is whitelisted, in order.
std::vector<PropertySpec> FilterProperties(
    const std::vector<PropertySpec>& catalog,
    const std::vector<std::string>& datatypes = DefaultDatatypeWhitelist());

struct PropertyUsage {
  std::string pid;
  int64_t distinct_humans = 0;

  friend bool operator==(const PropertyUsage&, const PropertyUsage&) = default;
};

// Per-property count of distinct human entities carrying at least one claim
// for that property. Entities are assumed unique across everything added
// (true for a dump and for disjoint shards of it), so the counter keeps one
// integer per property regardless of how many entities stream past.
class UsageCounter {
 public:
  // Empty `pids` counts every property observed on humans.
  explicit UsageCounter(std::set<std::string> pids = {});

  void Add(const EntityRecord& entity);
  void Merge(const UsageCounter& other);

  // Sorted by pid; tracked properties that never occur report zero.
  std::vector<PropertyUsage> Usage() const;
  int64_t humans_seen() const { return humans_seen_; }

 private:
  std::set<std::string> tracked_;
  std::map<std::string, int64_t> counts_;
  int64_t humans_seen_ = 0;
};

// Pids with distinct_humans >= min_humans, in the order of `usage`.
std::vector<std::string> ApplyUsageThreshold(
    const std::vector<PropertyUsage>& usage, int64_t min_humans);

struct HumanValuePair {
  std::string human;
  std::string value_qid;

  friend bool operator==(const HumanValuePair&, const HumanValuePair&) = default;
};

struct PairSample {
  std::string pid;
  std::vector<HumanValuePair> pairs;
};

// Keeps the first pair seen for each human label.
std::vector<HumanValuePair> DeduplicateByHuman(
    const std::vector<HumanValuePair>& pairs);

// Collects (English human label, value Q-id) pairs for entity-valued
// properties. Humans without an English label are skipped; non-entity
// values under a tracked property are skipped and counted.
class PairCollector {
 public:
  explicit PairCollector(std::set<std::string> pids);

  void Add(const EntityRecord& entity);

  // Appends `other`'s raw pairs after this collector's.
  void Merge(const PairCollector& other);

  // Deduplicated sample for one pid, file order preserved.
  PairSample Finish(const std::string& pid) const;

  int64_t skipped_values() const { return skipped_values_; }
  int64_t humans_without_label() const { return humans_without_label_; }

 private:
  std::set<std::string> pids_;
  std::map<std::string, std::vector<HumanValuePair>> raw_;
  int64_t skipped_values_ = 0;
  int64_t humans_without_label_ = 0;
};

// Combines per-shard samples of one pid: concatenation in shard order,
// first-seen dedup, then a stable sort by human label so the merged result
// does not depend on which shard finished first.
PairSample MergeShardSamples(const std::vector<PairSample>& shards);

struct IngestOptions {
  std::vector<std::string> dump_paths;
  Compression compression = Compression::kAuto;
  int64_t min_humans = 100;
  std::vector<std::string> datatypes = DefaultDatatypeWhitelist();
  int max_parallel_shards = 4;
  // Property metadata known up front; merged with property entities found
  // in the dump (the dump wins on conflicts).
  std::vector<PropertySpec> catalog;
};

struct IngestStats {
  int64_t lines_read = 0;
  int64_t malformed_lines = 0;
  int64_t malformed_claims = 0;
  int64_t humans = 0;
  int64_t skipped_pair_values = 0;
};

struct IngestResult {
  std::vector<PropertySpec> properties;  // whitelisted and above threshold
  std::vector<PropertyUsage> usage;      // every whitelisted property
  std::map<std::string, PairSample> pairs;  // entity-valued retained pids
  IngestStats stats;
};

// Two streaming passes over every shard: the first discovers the property
// catalog and counts usage, the second collects pairs for the retained
// entity-valued properties.
absl::StatusOr<IngestResult> RunIngest(const IngestOptions& options);

// properties.json, usage.json and pairs/<pid>.jsonl under `out_dir`.
absl::Status WriteIngestOutputs(const IngestResult& result,
                                const std::string& out_dir);

std::string PropertiesToJson(const std::vector<PropertySpec>& properties);
absl::StatusOr<std::vector<PropertySpec>> PropertiesFromJson(
    const std::string& text);

std::string PairsToJsonl(const PairSample& sample);
absl::StatusOr<PairSample> PairsFromJsonl(const std::string& pid,
                                          const std::string& text);

}  // namespace memaudit

#endif  // MEMAUDIT_INGEST_H_
