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

#ifndef MEMAUDIT_AUDIT_H_
#define MEMAUDIT_AUDIT_H_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "memaudit/canary.h"
#include "memaudit/likelihood.h"
#include "memaudit/metric.h"

namespace memaudit {

inline constexpr size_t kDefaultCounterfactuals = 100;

// Ground truths first, then counterfactuals; labels are unique across both.
struct CandidateSet {
  std::string pid;
  std::vector<std::string> ground_truths;
  std::vector<std::string> counterfactuals;

  std::vector<std::string> Labels() const;
  std::vector<size_t> GroundTruthIndices() const;
  size_t size() const { return ground_truths.size() + counterfactuals.size(); }
};

// Normalizes whitespace, drops duplicate labels (case-insensitive), removes
// counterfactuals that coincide with a ground truth and keeps at most
// `max_counterfactuals` of the rest. At least one ground truth is required.
absl::StatusOr<CandidateSet> MakeCandidateSet(
    const std::string& pid, const std::vector<std::string>& ground_truths,
    const std::vector<std::string>& counterfactuals,
    size_t max_counterfactuals = kDefaultCounterfactuals);

struct CandidateScoreRow {
  std::string label;
  bool ground_truth = false;
  double score = 0.0;
  int rank = 0;      // pessimistic tie rank
  int position = 0;  // strict report order
  int token_count = 0;

  friend bool operator==(const CandidateScoreRow&,
                         const CandidateScoreRow&) = default;
};

// Outcome of one canary template for one subject and property.
struct AuditRecord {
  std::string model;
  std::string subject;
  std::string qid;
  std::string pid;
  Cohort cohort = Cohort::kUnassigned;
  int variant_id = 0;
  TemplateKind kind = TemplateKind::kBaseline;
  bool memorized = false;
  std::optional<std::string> top_ground_truth;  // v*
  std::optional<double> lead_margin;            // Delta*
  std::optional<double> strength;               // z*
  std::vector<EquivalenceHit> equivalence_hits;
  // Candidates whose token count is more than twice, or less than half,
  // the candidate median.
  std::vector<std::string> length_outliers;
  bool unscored = false;
  std::string error;
  std::vector<CandidateScoreRow> scores;

  friend bool operator==(const AuditRecord&, const AuditRecord&) = default;
};

// One JSON object per line. Per-candidate scores are written only when
// `dump_scores` is set.
std::string RecordToJson(const AuditRecord& record, bool dump_scores = false);
absl::StatusOr<AuditRecord> RecordFromJson(const std::string& line);
std::string RecordsToJsonl(const std::vector<AuditRecord>& records,
                           bool dump_scores = false);
absl::StatusOr<std::vector<AuditRecord>> RecordsFromJsonl(const std::string& text);

// (subject, pid, variant_id) order, independent of scheduling.
void SortRecords(std::vector<AuditRecord>& records);

struct AuditOptions {
  double alpha = 1.0;
  size_t name_variants = 4;
  int contextualize = 0;       // auxiliary facts to prepend, at most four
  std::string property_label;  // audited property; excluded from context
  EquivalenceProvider equivalence = EquivalenceProvider::Exact();
  double length_outlier_factor = 2.0;
};

// Every text the audit of one template needs, grouped per candidate:
// subject sentence, generic-subject sentence, then one per name variant.
struct TemplateTexts {
  CanaryTemplate probed;  // after optional contextualization
  std::vector<std::vector<std::string>> per_candidate;
};

TemplateTexts BuildTemplateTexts(const CanaryTemplate& t,
                                 const SubjectProfile& subject,
                                 const std::vector<std::string>& labels,
                                 const std::vector<std::string>& name_variants,
                                 const AuditOptions& options);

// Scores every template for one subject and property and returns one
// record per template, in template order. Provider failures mark the
// affected records unscored instead of aborting.
absl::StatusOr<std::vector<AuditRecord>> AuditPair(
    const SubjectProfile& subject, const std::string& pid,
    const std::vector<CanaryTemplate>& templates, const CandidateSet& candidates,
    LikelihoodGateway& gateway, const AuditOptions& options);

// Scores one template's matrix into a record (no provider involved).
AuditRecord ScoreTemplate(const ScoreMatrix& matrix,
                          const CandidateSet& candidates,
                          const EquivalenceProvider& equivalence);

struct WebSignals {
  std::optional<double> pageviews;
  std::optional<double> article_bytes;
  std::optional<double> sitelinks;
};

struct SubjectEntry {
  SubjectProfile profile;
  WebSignals signals;
  std::map<std::string, std::vector<std::string>> ground_truths;  // pid ->
};

// subjects.json: [{"name", "qid", "pageviews", "article_bytes",
// "sitelinks", "aux_facts": [[label, value(, pid)], ...],
// "ground_truths": {pid: [labels]}, optional "cohort"}].
absl::StatusOr<std::vector<SubjectEntry>> SubjectsFromJson(const std::string& text);
std::string SubjectsToJson(const std::vector<SubjectEntry>& subjects);

struct AuditRunInputs {
  std::vector<SubjectEntry> subjects;
  std::vector<std::string> pids;
  std::map<std::string, std::vector<CanaryTemplate>> templates;   // by pid
  std::map<std::string, std::vector<std::string>> counterfactuals;  // by pid
  std::map<std::string, std::string> property_labels;             // by pid
  size_t max_counterfactuals = kDefaultCounterfactuals;
};

struct AuditRunResult {
  std::vector<AuditRecord> records;
  std::vector<std::string> warnings;
};

// Audits every (subject, pid) pair that has ground truths, templates and
// counterfactuals; skipped pairs are reported as warnings.
absl::StatusOr<AuditRunResult> RunAudit(const AuditRunInputs& inputs,
                                        LikelihoodGateway& gateway,
                                        const AuditOptions& options);

}  // namespace memaudit

#endif  // MEMAUDIT_AUDIT_H_
