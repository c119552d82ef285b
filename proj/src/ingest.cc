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

#include "memaudit/ingest.h"

#include <algorithm>
#include <filesystem>
#include <future>
#include <sstream>
#include <unordered_set>

#include "absl/strings/str_cat.h"
#include "json.hpp"
#include "memaudit/file_util.h"
#include "memaudit/status_macros.h"

namespace memaudit {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

struct ShardPassOne {
  std::vector<PropertySpec> catalog;
  UsageCounter usage;
  IngestStats stats;
};

absl::StatusOr<ShardPassOne> CountShard(const std::string& path,
                                        Compression compression) {
  MEMAUDIT_ASSIGN_OR_RETURN(std::unique_ptr<EntityStream> stream,
                            EntityStream::Open(path, compression));
  ShardPassOne out;
  while (true) {
    MEMAUDIT_ASSIGN_OR_RETURN(std::optional<EntityRecord> entity,
                              stream->Next());
    if (!entity) break;
    if (IsHuman(*entity)) ++out.stats.humans;
    out.usage.Add(*entity);
  }
  out.catalog = stream->properties();
  out.stats.lines_read = stream->lines_read();
  out.stats.malformed_lines = stream->malformed_lines();
  out.stats.malformed_claims = stream->malformed_claims();
  return out;
}

absl::StatusOr<PairCollector> CollectShard(const std::string& path,
                                           Compression compression,
                                           const std::set<std::string>& pids) {
  MEMAUDIT_ASSIGN_OR_RETURN(std::unique_ptr<EntityStream> stream,
                            EntityStream::Open(path, compression));
  PairCollector collector(pids);
  while (true) {
    MEMAUDIT_ASSIGN_OR_RETURN(std::optional<EntityRecord> entity,
                              stream->Next());
    if (!entity) break;
    collector.Add(*entity);
  }
  return collector;
}

// Runs `fn(i)` for every shard with at most `limit` shards in flight and
// returns results in shard order.
template <typename T, typename Fn>
absl::StatusOr<std::vector<T>> ForEachShard(size_t shards, int limit, Fn fn) {
  std::vector<T> results;
  results.reserve(shards);
  size_t step = static_cast<size_t>(std::max(limit, 1));
  for (size_t begin = 0; begin < shards; begin += step) {
    size_t end = std::min(shards, begin + step);
    std::vector<std::future<absl::StatusOr<T>>> futures;
    for (size_t i = begin; i < end; ++i) {
      futures.push_back(std::async(std::launch::async, fn, i));
    }
    for (auto& f : futures) {
      absl::StatusOr<T> r = f.get();
      if (!r.ok()) return r.status();
      results.push_back(std::move(r).value());
    }
  }
  return results;
}

}  // namespace

bool IsHuman(const EntityRecord& entity) {
  auto it = entity.claims.find(std::string(kInstanceOf));
  if (it == entity.claims.end()) return false;
  return std::any_of(it->second.begin(), it->second.end(),
                     [](const ClaimValue& v) {
                       return v.kind == ValueKind::kEntity && v.text == kHumanClass;
                     });
}

std::vector<PropertySpec> FilterProperties(
    const std::vector<PropertySpec>& catalog,
    const std::vector<std::string>& datatypes) {
  std::vector<PropertySpec> kept;
  for (const PropertySpec& p : catalog) {
    if (std::find(datatypes.begin(), datatypes.end(), p.datatype) !=
        datatypes.end()) {
      kept.push_back(p);
    }
  }
  return kept;
}

UsageCounter::UsageCounter(std::set<std::string> pids)
    : tracked_(std::move(pids)) {
  for (const std::string& pid : tracked_) counts_[pid] = 0;
}

void UsageCounter::Add(const EntityRecord& entity) {
  if (!IsHuman(entity)) return;
  ++humans_seen_;
  for (const auto& [pid, values] : entity.claims) {
    if (values.empty()) continue;
    if (!tracked_.empty() && !tracked_.contains(pid)) continue;
    ++counts_[pid];
  }
}

void UsageCounter::Merge(const UsageCounter& other) {
  for (const auto& [pid, count] : other.counts_) {
    if (!tracked_.empty() && !tracked_.contains(pid)) continue;
    counts_[pid] += count;
  }
  humans_seen_ += other.humans_seen_;
}

std::vector<PropertyUsage> UsageCounter::Usage() const {
  std::vector<PropertyUsage> out;
  out.reserve(counts_.size());
  for (const auto& [pid, count] : counts_) out.push_back({pid, count});
  return out;
}

std::vector<std::string> ApplyUsageThreshold(
    const std::vector<PropertyUsage>& usage, int64_t min_humans) {
  std::vector<std::string> kept;
  for (const PropertyUsage& u : usage) {
    if (u.distinct_humans >= min_humans) kept.push_back(u.pid);
  }
  return kept;
}

std::vector<HumanValuePair> DeduplicateByHuman(
    const std::vector<HumanValuePair>& pairs) {
  std::unordered_set<std::string> seen;
  std::vector<HumanValuePair> out;
  for (const HumanValuePair& p : pairs) {
    if (seen.insert(p.human).second) out.push_back(p);
  }
  return out;
}

PairCollector::PairCollector(std::set<std::string> pids)
    : pids_(std::move(pids)) {}

void PairCollector::Add(const EntityRecord& entity) {
  if (!IsHuman(entity)) return;
  std::optional<std::string> label = entity.EnglishLabel();
  if (!label) {
    ++humans_without_label_;
    return;
  }
  for (const std::string& pid : pids_) {
    auto it = entity.claims.find(pid);
    if (it == entity.claims.end()) continue;
    for (const ClaimValue& value : it->second) {
      if (value.kind != ValueKind::kEntity || !IsEntityId(value.text)) {
        ++skipped_values_;
        continue;
      }
      raw_[pid].push_back({*label, value.text});
    }
  }
}

void PairCollector::Merge(const PairCollector& other) {
  for (const auto& [pid, pairs] : other.raw_) {
    std::vector<HumanValuePair>& dst = raw_[pid];
    dst.insert(dst.end(), pairs.begin(), pairs.end());
  }
  skipped_values_ += other.skipped_values_;
  humans_without_label_ += other.humans_without_label_;
}

PairSample PairCollector::Finish(const std::string& pid) const {
  PairSample sample{pid, {}};
  auto it = raw_.find(pid);
  if (it != raw_.end()) sample.pairs = DeduplicateByHuman(it->second);
  return sample;
}

PairSample MergeShardSamples(const std::vector<PairSample>& shards) {
  PairSample merged;
  std::vector<HumanValuePair> all;
  for (const PairSample& s : shards) {
    if (merged.pid.empty()) merged.pid = s.pid;
    all.insert(all.end(), s.pairs.begin(), s.pairs.end());
  }
  merged.pairs = DeduplicateByHuman(all);
  std::stable_sort(merged.pairs.begin(), merged.pairs.end(),
                   [](const HumanValuePair& a, const HumanValuePair& b) {
                     return a.human < b.human;
                   });
  return merged;
}

absl::StatusOr<IngestResult> RunIngest(const IngestOptions& options) {
  if (options.dump_paths.empty()) {
    return absl::InvalidArgumentError("no dump files given");
  }
  const size_t shards = options.dump_paths.size();

  MEMAUDIT_ASSIGN_OR_RETURN(
      std::vector<ShardPassOne> pass_one,
      ForEachShard<ShardPassOne>(shards, options.max_parallel_shards,
                                 [&](size_t i) {
                                   return CountShard(options.dump_paths[i],
                                                     options.compression);
                                 }));

  IngestResult result;
  std::vector<PropertySpec> catalog;
  std::set<std::string> catalog_pids;
  UsageCounter usage;
  for (ShardPassOne& shard : pass_one) {
    for (PropertySpec& p : shard.catalog) {
      if (catalog_pids.insert(p.pid).second) catalog.push_back(std::move(p));
    }
    usage.Merge(shard.usage);
    result.stats.lines_read += shard.stats.lines_read;
    result.stats.malformed_lines += shard.stats.malformed_lines;
    result.stats.malformed_claims += shard.stats.malformed_claims;
    result.stats.humans += shard.stats.humans;
  }
  for (const PropertySpec& p : options.catalog) {
    if (catalog_pids.insert(p.pid).second) catalog.push_back(p);
  }
  std::sort(catalog.begin(), catalog.end(),
            [](const PropertySpec& a, const PropertySpec& b) {
              return a.pid < b.pid;
            });

  std::vector<PropertySpec> whitelisted =
      FilterProperties(catalog, options.datatypes);
  std::map<std::string, int64_t> counts;
  for (const PropertyUsage& u : usage.Usage()) counts[u.pid] = u.distinct_humans;
  for (const PropertySpec& p : whitelisted) {
    PropertyUsage u{p.pid, counts.contains(p.pid) ? counts[p.pid] : 0};
    result.usage.push_back(u);
    if (u.distinct_humans >= options.min_humans) result.properties.push_back(p);
  }

  std::set<std::string> entity_pids;
  for (const PropertySpec& p : result.properties) {
    if (p.datatype == kDatatypeWikibaseItem) entity_pids.insert(p.pid);
  }
  if (entity_pids.empty()) return result;

  MEMAUDIT_ASSIGN_OR_RETURN(
      std::vector<PairCollector> pass_two,
      ForEachShard<PairCollector>(shards, options.max_parallel_shards,
                                  [&](size_t i) {
                                    return CollectShard(options.dump_paths[i],
                                                        options.compression,
                                                        entity_pids);
                                  }));
  for (const std::string& pid : entity_pids) {
    if (shards == 1) {
      result.pairs[pid] = pass_two[0].Finish(pid);
      continue;
    }
    std::vector<PairSample> samples;
    for (const PairCollector& c : pass_two) samples.push_back(c.Finish(pid));
    result.pairs[pid] = MergeShardSamples(samples);
  }
  for (const PairCollector& c : pass_two) {
    result.stats.skipped_pair_values += c.skipped_values();
  }
  return result;
}

std::string PropertiesToJson(const std::vector<PropertySpec>& properties) {
  ordered_json root = ordered_json::object();
  for (const PropertySpec& p : properties) {
    root[p.pid] = ordered_json{{"label", p.label},
                               {"description", p.description},
                               {"aliases", p.aliases},
                               {"datatype", p.datatype}};
  }
  return root.dump(2) + "\n";
}

absl::StatusOr<std::vector<PropertySpec>> PropertiesFromJson(
    const std::string& text) {
  ordered_json root = ordered_json::parse(text, nullptr, false);
  if (root.is_discarded() || !root.is_object()) {
    return absl::InvalidArgumentError("properties file is not a JSON object");
  }
  std::vector<PropertySpec> out;
  for (const auto& [pid, body] : root.items()) {
    if (!IsPropertyId(pid) || !body.is_object()) {
      return absl::InvalidArgumentError(absl::StrCat("bad property entry ", pid));
    }
    PropertySpec p;
    p.pid = pid;
    p.label = body.value("label", "");
    p.description = body.value("description", "");
    p.datatype = body.value("datatype", std::string(kDatatypeWikibaseItem));
    if (body.contains("aliases") && body["aliases"].is_array()) {
      for (const auto& a : body["aliases"]) {
        if (a.is_string()) p.aliases.push_back(a.get<std::string>());
      }
    }
    if (p.label.empty()) {
      return absl::InvalidArgumentError(absl::StrCat(pid, " has an empty label"));
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::string PairsToJsonl(const PairSample& sample) {
  std::string out;
  for (const HumanValuePair& p : sample.pairs) {
    ordered_json line{{"human", p.human}, {"value_qid", p.value_qid}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

absl::StatusOr<PairSample> PairsFromJsonl(const std::string& pid,
                                          const std::string& text) {
  PairSample sample{pid, {}};
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("human") ||
        !j.contains("value_qid") || !j["human"].is_string() ||
        !j["value_qid"].is_string()) {
      return absl::InvalidArgumentError(
          absl::StrCat("pairs for ", pid, ": bad line ", line_no));
    }
    sample.pairs.push_back(
        {j["human"].get<std::string>(), j["value_qid"].get<std::string>()});
  }
  return sample;
}

absl::Status WriteIngestOutputs(const IngestResult& result,
                                const std::string& out_dir) {
  namespace fs = std::filesystem;
  MEMAUDIT_RETURN_IF_ERROR(
      WriteFile((fs::path(out_dir) / "properties.json").string(),
                PropertiesToJson(result.properties)));
  ordered_json usage = ordered_json::object();
  for (const PropertyUsage& u : result.usage) usage[u.pid] = u.distinct_humans;
  ordered_json stats{{"lines_read", result.stats.lines_read},
                     {"malformed_lines", result.stats.malformed_lines},
                     {"malformed_claims", result.stats.malformed_claims},
                     {"humans", result.stats.humans},
                     {"skipped_pair_values", result.stats.skipped_pair_values}};
  ordered_json usage_doc{{"distinct_humans", usage}, {"stats", stats}};
  MEMAUDIT_RETURN_IF_ERROR(WriteFile(
      (fs::path(out_dir) / "usage.json").string(), usage_doc.dump(2) + "\n"));
  for (const auto& [pid, sample] : result.pairs) {
    MEMAUDIT_RETURN_IF_ERROR(
        WriteFile((fs::path(out_dir) / "pairs" / (pid + ".jsonl")).string(),
                  PairsToJsonl(sample)));
  }
  return absl::OkStatus();
}

}  // namespace memaudit
