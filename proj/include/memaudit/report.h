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

#ifndef MEMAUDIT_REPORT_H_
#define MEMAUDIT_REPORT_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "memaudit/audit.h"

namespace memaudit {

enum class AggregationMode { kStrict, kLenient };

std::string_view AggregationModeName(AggregationMode mode);
absl::StatusOr<AggregationMode> ParseAggregationMode(std::string_view name);

inline constexpr int kSummarySchemaVersion = 1;

// Per (model, cohort) summary. Rates are percentages over subject-property
// pairs; optional fields are empty when the cohort has no scored pairs (or,
// for mean_strength, no memorized record).
struct CohortSummary {
  std::string model;
  std::string cohort;
  AggregationMode mode = AggregationMode::kStrict;
  // Headline rate. Strict: rate_mean_pct. Lenient: share of pairs where
  // any template variant succeeded.
  std::optional<double> mean_rate;
  // Mean over pairs of the percentage of template variants at rank 1.
  std::optional<double> rate_mean_pct;
  // Share of pairs memorized under the mode's rule (strict: every variant,
  // lenient: any variant).
  std::optional<double> rate_all_or_nothing_pct;
  std::optional<double> mean_strength;  // over memorized records
  int64_t zero_subjects = 0;            // subjects with no memorized pair
  int64_t cohort_size = 0;
  int64_t pairs = 0;
  int64_t records = 0;
  int64_t excluded_records = 0;  // unscored
  int64_t incomplete_pairs = 0;  // fewer variants than the property has

  friend bool operator==(const CohortSummary&, const CohortSummary&) = default;
};

struct AggregateResult {
  std::vector<CohortSummary> summaries;  // sorted by (model, cohort)
  std::vector<std::string> warnings;
};

AggregateResult Aggregate(const std::vector<AuditRecord>& records,
                          AggregationMode mode);

// "model | cohort | M̄(%) | z̄* | H_{M=0}/N" rows followed by a footer
// explaining how the rate was computed. No summaries yields a single row of
// "n/a" cells.
std::string FormatTable(const std::vector<CohortSummary>& summaries);
std::string FormatTableRow(const CohortSummary& summary);

std::string SummariesToCsv(const std::vector<CohortSummary>& summaries);
absl::StatusOr<std::vector<CohortSummary>> SummariesFromCsv(const std::string& csv);

std::string SummariesToJson(const std::vector<CohortSummary>& summaries);
absl::StatusOr<std::vector<CohortSummary>> SummariesFromJson(const std::string& text);

struct PropertyBreakdownRow {
  std::string model;
  std::string pid;
  int variant_id = 0;
  int64_t memorized = 0;
  int64_t scored = 0;
  double rate_pct = 0.0;

  friend bool operator==(const PropertyBreakdownRow&,
                         const PropertyBreakdownRow&) = default;
};

// One row per (model, pid, variant_id) present in the records: the share of
// subjects whose record for that variant is memorized.
std::vector<PropertyBreakdownRow> PropertyBreakdown(
    const std::vector<AuditRecord>& records);
std::string PropertyBreakdownToCsv(const std::vector<PropertyBreakdownRow>& rows);

struct CohortAssignment {
  size_t subject_index = 0;
  std::optional<double> composite;  // empty when a signal was missing
  Cohort cohort = Cohort::kUnassigned;
};

struct CohortSplitOptions {
  // When set, draw this many subjects at random from each half instead of
  // assigning every subject; the rest stay unassigned.
  std::optional<size_t> sample_per_cohort;
  uint64_t seed = 0;
};

struct CohortSplitResult {
  std::vector<CohortAssignment> assignments;  // input order
  std::vector<std::string> warnings;
};

// Composite web presence = geometric mean of the min-max normalized page
// views, article length and sitelink count. The upper half (rounded up) by
// composite is well-known, the rest lesser-known. A signal that is constant
// across subjects normalizes to 1 so it does not zero every composite.
CohortSplitResult CohortSplit(const std::vector<SubjectEntry>& subjects,
                              const CohortSplitOptions& options = {});

}  // namespace memaudit

#endif  // MEMAUDIT_REPORT_H_
