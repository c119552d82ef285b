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

#include "memaudit/report.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "json.hpp"
#include "memaudit/label_service.h"
#include "memaudit/text.h"

namespace memaudit {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr char kCsvHeader[] =
    "model,cohort,mode,mean_rate_pct,rate_mean_pct,rate_all_or_nothing_pct,"
    "mean_strength,zero_subjects,cohort_size,pairs,records,excluded_records,"
    "incomplete_pairs";

std::string Fixed2(const std::optional<double>& v) {
  return v ? absl::StrFormat("%.2f", *v) : std::string("n/a");
}

std::string Exact(const std::optional<double>& v) {
  return v ? absl::StrFormat("%.17g", *v) : std::string("n/a");
}

std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  return absl::StrCat("\"", ReplaceAll(s, "\"", "\"\""), "\"");
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

absl::StatusOr<std::optional<double>> ParseOptionalDouble(const std::string& s) {
  if (s == "n/a" || s.empty()) return std::optional<double>();
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    return absl::InvalidArgumentError(absl::StrCat("not a number: '", s, "'"));
  }
  return std::optional<double>(v);
}

absl::StatusOr<int64_t> ParseInt(const std::string& s) {
  char* end = nullptr;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0') {
    return absl::InvalidArgumentError(absl::StrCat("not an integer: '", s, "'"));
  }
  return static_cast<int64_t>(v);
}

ordered_json OptionalJson(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

std::optional<double> OptionalFromJson(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

struct Cell {
  int64_t scored = 0;
  int64_t memorized = 0;
  std::set<int> variants;
  std::map<int, double> strengths;  // by variant, summed in key order
};

struct Group {
  std::map<std::pair<std::string, std::string>, Cell> cells;  // (subject, pid)
  std::set<std::string> subjects;
  int64_t records = 0;
  int64_t excluded = 0;
};

std::string SubjectKey(const AuditRecord& r) {
  return r.qid.empty() ? r.subject : absl::StrCat(r.subject, " (", r.qid, ")");
}

}  // namespace

std::string_view AggregationModeName(AggregationMode mode) {
  return mode == AggregationMode::kStrict ? "strict" : "lenient";
}

absl::StatusOr<AggregationMode> ParseAggregationMode(std::string_view name) {
  if (name == "strict") return AggregationMode::kStrict;
  if (name == "lenient") return AggregationMode::kLenient;
  return absl::InvalidArgumentError(
      absl::StrCat("mode must be strict or lenient, got '", std::string(name), "'"));
}

AggregateResult Aggregate(const std::vector<AuditRecord>& records,
                          AggregationMode mode) {
  AggregateResult result;
  std::map<std::pair<std::string, std::string>, Group> groups;
  std::map<std::pair<std::string, std::string>, std::set<int>> expected;

  for (const AuditRecord& r : records) {
    expected[{r.model, r.pid}].insert(r.variant_id);
    Group& g = groups[{r.model, std::string(CohortName(r.cohort))}];
    ++g.records;
    if (r.unscored) {
      ++g.excluded;
      continue;
    }
    Cell& cell = g.cells[{SubjectKey(r), r.pid}];
    if (!cell.variants.insert(r.variant_id).second) {
      result.warnings.push_back(absl::StrCat("duplicate record for ", SubjectKey(r),
                                             " ", r.pid, " variant ",
                                             r.variant_id, " ignored"));
      continue;
    }
    g.subjects.insert(SubjectKey(r));
    ++cell.scored;
    if (r.memorized) ++cell.memorized;
    if (r.memorized && r.strength) cell.strengths[r.variant_id] = *r.strength;
  }

  for (auto& [key, g] : groups) {
    const auto& [model, cohort] = key;
    CohortSummary s;
    s.model = model;
    s.cohort = cohort;
    s.mode = mode;
    s.records = g.records;
    s.excluded_records = g.excluded;
    if (g.excluded > 0) {
      result.warnings.push_back(absl::StrCat(model, "/", cohort, ": ", g.excluded,
                                             " unscored records excluded"));
    }

    double pct_sum = 0.0;
    int64_t all_count = 0;
    int64_t any_count = 0;
    std::set<std::string> subjects_with_memorized;
    double strength_sum = 0.0;
    int64_t strength_count = 0;
    for (const auto& [cell_key, cell] : g.cells) {
      const auto& [subject, pid] = cell_key;
      for (const auto& [variant, z] : cell.strengths) {
        strength_sum += z;
        ++strength_count;
      }
      const size_t want = expected[{model, pid}].size();
      if (cell.variants.size() < want) {
        ++s.incomplete_pairs;
        result.warnings.push_back(absl::StrCat(model, "/", cohort, ": ", subject,
                                               " ", pid, " has ", cell.variants.size(),
                                               "/", want, " variants scored"));
      }
      pct_sum += 100.0 * static_cast<double>(cell.memorized) /
                 static_cast<double>(cell.scored);
      const bool all = cell.memorized == cell.scored;
      const bool any = cell.memorized > 0;
      all_count += all;
      any_count += any;
      if (mode == AggregationMode::kStrict ? all : any) {
        subjects_with_memorized.insert(subject);
      }
    }
    s.pairs = static_cast<int64_t>(g.cells.size());
    s.cohort_size = static_cast<int64_t>(g.subjects.size());
    s.zero_subjects = s.cohort_size - static_cast<int64_t>(subjects_with_memorized.size());
    if (s.pairs > 0) {
      const double pairs = static_cast<double>(s.pairs);
      s.rate_mean_pct = pct_sum / pairs;
      const double all_pct = 100.0 * static_cast<double>(all_count) / pairs;
      const double any_pct = 100.0 * static_cast<double>(any_count) / pairs;
      if (mode == AggregationMode::kStrict) {
        s.mean_rate = s.rate_mean_pct;
        s.rate_all_or_nothing_pct = all_pct;
      } else {
        s.mean_rate = any_pct;
        s.rate_all_or_nothing_pct = any_pct;
      }
    }
    if (strength_count > 0) {
      s.mean_strength = strength_sum / static_cast<double>(strength_count);
    }
    result.summaries.push_back(std::move(s));
  }
  return result;
}

std::string FormatTableRow(const CohortSummary& s) {
  return absl::StrCat(s.model, " | ", s.cohort, " | ", Fixed2(s.mean_rate), " | ",
                      Fixed2(s.mean_strength), " | ", s.zero_subjects, "/",
                      s.cohort_size);
}

std::string FormatTable(const std::vector<CohortSummary>& summaries) {
  std::string out = "model | cohort | M̄(%) | z̄* | H_{M=0}/N\n";
  if (summaries.empty()) {
    out += "n/a | n/a | n/a | n/a | n/a\n";
    return out;
  }
  for (const CohortSummary& s : summaries) {
    out += FormatTableRow(s);
    out += '\n';
  }
  const AggregationMode mode = summaries.front().mode;
  out += "\n";
  if (mode == AggregationMode::kStrict) {
    out +=
        "# M̄: mean over subject-property pairs of the percentage of template "
        "variants whose ground truth ranks first (strict).\n";
  } else {
    out +=
        "# M̄: percentage of subject-property pairs where at least one "
        "template variant ranks a ground truth first (lenient).\n";
  }
  out +=
      "# z̄*: mean memorization strength over memorized records. H_{M=0}: "
      "subjects with no memorized property under this mode.\n";
  return out;
}

std::string SummariesToCsv(const std::vector<CohortSummary>& summaries) {
  std::string out = absl::StrCat(kCsvHeader, "\n");
  for (const CohortSummary& s : summaries) {
    absl::StrAppend(&out, CsvField(s.model), ",", CsvField(s.cohort), ",",
                    std::string(AggregationModeName(s.mode)), ",", Exact(s.mean_rate), ",",
                    Exact(s.rate_mean_pct), ",", Exact(s.rate_all_or_nothing_pct),
                    ",", Exact(s.mean_strength), ",", s.zero_subjects, ",",
                    s.cohort_size, ",", s.pairs, ",", s.records, ",",
                    s.excluded_records, ",", s.incomplete_pairs, "\n");
  }
  return out;
}

absl::StatusOr<std::vector<CohortSummary>> SummariesFromCsv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    return absl::InvalidArgumentError("unexpected summary CSV header");
  }
  std::vector<CohortSummary> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f = SplitCsvLine(line);
    if (f.size() != 13) {
      return absl::InvalidArgumentError(absl::StrCat("expected 13 fields: ", line));
    }
    CohortSummary s;
    s.model = f[0];
    s.cohort = f[1];
    absl::StatusOr<AggregationMode> mode = ParseAggregationMode(f[2]);
    if (!mode.ok()) return mode.status();
    s.mode = *mode;
    std::optional<double>* doubles[] = {&s.mean_rate, &s.rate_mean_pct,
                                        &s.rate_all_or_nothing_pct,
                                        &s.mean_strength};
    for (int k = 0; k < 4; ++k) {
      absl::StatusOr<std::optional<double>> v = ParseOptionalDouble(f[3 + k]);
      if (!v.ok()) return v.status();
      *doubles[k] = *v;
    }
    int64_t* ints[] = {&s.zero_subjects, &s.cohort_size, &s.pairs,
                       &s.records, &s.excluded_records, &s.incomplete_pairs};
    for (int k = 0; k < 6; ++k) {
      absl::StatusOr<int64_t> v = ParseInt(f[7 + k]);
      if (!v.ok()) return v.status();
      *ints[k] = *v;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string SummariesToJson(const std::vector<CohortSummary>& summaries) {
  ordered_json rows = ordered_json::array();
  for (const CohortSummary& s : summaries) {
    rows.push_back(ordered_json{
        {"model", s.model},
        {"cohort", s.cohort},
        {"mode", AggregationModeName(s.mode)},
        {"mean_rate_pct", OptionalJson(s.mean_rate)},
        {"rate_mean_pct", OptionalJson(s.rate_mean_pct)},
        {"rate_all_or_nothing_pct", OptionalJson(s.rate_all_or_nothing_pct)},
        {"mean_strength", OptionalJson(s.mean_strength)},
        {"zero_subjects", s.zero_subjects},
        {"cohort_size", s.cohort_size},
        {"pairs", s.pairs},
        {"records", s.records},
        {"excluded_records", s.excluded_records},
        {"incomplete_pairs", s.incomplete_pairs}});
  }
  ordered_json root{{"schema_version", kSummarySchemaVersion},
                    {"summaries", std::move(rows)}};
  return root.dump(2) + "\n";
}

absl::StatusOr<std::vector<CohortSummary>> SummariesFromJson(const std::string& text) {
  json root = json::parse(text, nullptr, false);
  if (root.is_discarded() || !root.is_object() ||
      root.value("schema_version", 0) != kSummarySchemaVersion ||
      !root.contains("summaries") || !root["summaries"].is_array()) {
    return absl::InvalidArgumentError("not a version-1 summary document");
  }
  std::vector<CohortSummary> out;
  try {
    for (const json& j : root["summaries"]) {
      CohortSummary s;
      s.model = j.at("model").get<std::string>();
      s.cohort = j.at("cohort").get<std::string>();
      absl::StatusOr<AggregationMode> mode =
          ParseAggregationMode(j.at("mode").get<std::string>());
      if (!mode.ok()) return mode.status();
      s.mode = *mode;
      s.mean_rate = OptionalFromJson(j, "mean_rate_pct");
      s.rate_mean_pct = OptionalFromJson(j, "rate_mean_pct");
      s.rate_all_or_nothing_pct = OptionalFromJson(j, "rate_all_or_nothing_pct");
      s.mean_strength = OptionalFromJson(j, "mean_strength");
      s.zero_subjects = j.at("zero_subjects").get<int64_t>();
      s.cohort_size = j.at("cohort_size").get<int64_t>();
      s.pairs = j.at("pairs").get<int64_t>();
      s.records = j.at("records").get<int64_t>();
      s.excluded_records = j.at("excluded_records").get<int64_t>();
      s.incomplete_pairs = j.at("incomplete_pairs").get<int64_t>();
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("bad summary: ", e.what()));
  }
  return out;
}

std::vector<PropertyBreakdownRow> PropertyBreakdown(
    const std::vector<AuditRecord>& records) {
  std::map<std::tuple<std::string, std::string, int>, PropertyBreakdownRow> rows;
  for (const AuditRecord& r : records) {
    if (r.unscored) continue;
    PropertyBreakdownRow& row = rows[{r.model, r.pid, r.variant_id}];
    row.model = r.model;
    row.pid = r.pid;
    row.variant_id = r.variant_id;
    ++row.scored;
    if (r.memorized) ++row.memorized;
  }
  std::vector<PropertyBreakdownRow> out;
  for (auto& [key, row] : rows) {
    row.rate_pct = 100.0 * static_cast<double>(row.memorized) /
                   static_cast<double>(row.scored);
    out.push_back(row);
  }
  return out;
}

std::string PropertyBreakdownToCsv(const std::vector<PropertyBreakdownRow>& rows) {
  std::string out = "model,pid,variant_id,memorized,scored,rate_pct\n";
  for (const PropertyBreakdownRow& r : rows) {
    absl::StrAppend(&out, CsvField(r.model), ",", r.pid, ",", r.variant_id, ",",
                    r.memorized, ",", r.scored, ",",
                    absl::StrFormat("%.17g", r.rate_pct), "\n");
  }
  return out;
}

CohortSplitResult CohortSplit(const std::vector<SubjectEntry>& subjects,
                              const CohortSplitOptions& options) {
  CohortSplitResult result;
  result.assignments.resize(subjects.size());
  std::vector<size_t> usable;
  for (size_t i = 0; i < subjects.size(); ++i) {
    result.assignments[i].subject_index = i;
    const WebSignals& w = subjects[i].signals;
    if (!w.pageviews || !w.article_bytes || !w.sitelinks) {
      result.warnings.push_back(absl::StrCat(subjects[i].profile.name,
                                             " lacks a web-presence signal; excluded"));
      continue;
    }
    usable.push_back(i);
  }
  if (usable.empty()) return result;

  auto normalized = [&](auto getter) {
    double lo = getter(subjects[usable.front()]);
    double hi = lo;
    for (size_t i : usable) {
      lo = std::min(lo, getter(subjects[i]));
      hi = std::max(hi, getter(subjects[i]));
    }
    std::map<size_t, double> out;
    for (size_t i : usable) {
      out[i] = hi > lo ? (getter(subjects[i]) - lo) / (hi - lo) : 1.0;
    }
    return out;
  };
  auto views = normalized([](const SubjectEntry& s) { return *s.signals.pageviews; });
  auto bytes =
      normalized([](const SubjectEntry& s) { return *s.signals.article_bytes; });
  auto links = normalized([](const SubjectEntry& s) { return *s.signals.sitelinks; });
  for (size_t i : usable) {
    result.assignments[i].composite = std::cbrt(views[i] * bytes[i] * links[i]);
  }

  std::vector<size_t> order = usable;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return *result.assignments[a].composite > *result.assignments[b].composite;
  });
  const size_t upper = (order.size() + 1) / 2;
  std::vector<size_t> well(order.begin(), order.begin() + upper);
  std::vector<size_t> lesser(order.begin() + upper, order.end());

  if (options.sample_per_cohort) {
    auto sample = [&](std::vector<size_t>& half, uint64_t seed) {
      std::vector<size_t> perm = SeededPermutation(half.size(), seed);
      std::vector<size_t> picked;
      for (size_t k = 0; k < perm.size() && picked.size() < *options.sample_per_cohort; ++k) {
        picked.push_back(half[perm[k]]);
      }
      if (picked.size() < *options.sample_per_cohort) {
        result.warnings.push_back(absl::StrCat("cohort half has only ", half.size(),
                                               " subjects"));
      }
      half = std::move(picked);
    };
    sample(well, options.seed);
    sample(lesser, options.seed + 1);
  }
  for (size_t i : well) result.assignments[i].cohort = Cohort::kWellKnown;
  for (size_t i : lesser) result.assignments[i].cohort = Cohort::kLesserKnown;
  return result;
}

}  // namespace memaudit
