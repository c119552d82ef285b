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

#include "memaudit/audit.h"

#include <algorithm>
#include <set>
#include <sstream>
#include <tuple>

#include "absl/strings/str_cat.h"
#include "json.hpp"
#include "memaudit/text.h"

namespace memaudit {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json OptionalNumber(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

std::optional<double> ReadOptionalNumber(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

std::vector<std::string> Deduplicate(const std::vector<std::string>& labels,
                                     std::set<std::string>& seen) {
  std::vector<std::string> out;
  for (const std::string& raw : labels) {
    std::string label = NormalizeWhitespace(raw);
    if (label.empty()) continue;
    if (seen.insert(NormalizeLabel(label)).second) out.push_back(label);
  }
  return out;
}

void FlagLengthOutliers(AuditRecord& record, double factor) {
  std::vector<int> counts;
  for (const CandidateScoreRow& row : record.scores) {
    if (row.token_count > 0) counts.push_back(row.token_count);
  }
  if (counts.empty()) return;
  std::sort(counts.begin(), counts.end());
  const size_t n = counts.size();
  const double median = n % 2 == 1
                            ? counts[n / 2]
                            : 0.5 * (counts[n / 2 - 1] + counts[n / 2]);
  for (const CandidateScoreRow& row : record.scores) {
    if (row.token_count <= 0) continue;
    if (row.token_count > factor * median || row.token_count * factor < median) {
      record.length_outliers.push_back(row.label);
    }
  }
}

}  // namespace

std::vector<std::string> CandidateSet::Labels() const {
  std::vector<std::string> labels = ground_truths;
  labels.insert(labels.end(), counterfactuals.begin(), counterfactuals.end());
  return labels;
}

std::vector<size_t> CandidateSet::GroundTruthIndices() const {
  std::vector<size_t> idx(ground_truths.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

absl::StatusOr<CandidateSet> MakeCandidateSet(
    const std::string& pid, const std::vector<std::string>& ground_truths,
    const std::vector<std::string>& counterfactuals,
    size_t max_counterfactuals) {
  CandidateSet set;
  set.pid = pid;
  std::set<std::string> seen;
  set.ground_truths = Deduplicate(ground_truths, seen);
  if (set.ground_truths.empty()) {
    return absl::InvalidArgumentError(
        absl::StrCat("no ground truth values for ", pid));
  }
  set.counterfactuals = Deduplicate(counterfactuals, seen);
  if (set.counterfactuals.size() > max_counterfactuals) {
    set.counterfactuals.resize(max_counterfactuals);
  }
  return set;
}

AuditRecord ScoreTemplate(const ScoreMatrix& matrix,
                          const CandidateSet& candidates,
                          const EquivalenceProvider& equivalence) {
  AuditRecord record;
  record.pid = candidates.pid;
  absl::StatusOr<std::vector<double>> scores = CalibratedScores(matrix);
  if (!scores.ok()) {
    record.unscored = true;
    record.error = std::string(scores.status().message());
    return record;
  }
  const std::vector<std::string> labels = candidates.Labels();
  if (labels.size() != scores->size()) {
    record.unscored = true;
    record.error = "score matrix does not match the candidate set";
    return record;
  }
  const std::vector<size_t> gts = candidates.GroundTruthIndices();
  Ranking ranking = RankCandidates(*scores);
  MemorizationDecision decision =
      DecideMemorization(ranking, labels, gts, equivalence);

  for (size_t i = 0; i < labels.size(); ++i) {
    record.scores.push_back({labels[i], i < candidates.ground_truths.size(),
                             (*scores)[i], ranking.rank[i], ranking.position[i],
                             0});
  }
  record.memorized = decision.memorized;
  record.equivalence_hits = decision.equivalence_hits;
  if (!decision.memorized) return record;

  record.top_ground_truth = labels[*decision.top_ground_truth];
  // An accepted equivalent counterfactual stands in for v* and is not a
  // competitor when measuring the lead.
  std::vector<size_t> credited = gts;
  size_t leader = *decision.top_ground_truth;
  if (decision.equivalent_counterfactual) {
    leader = *decision.equivalent_counterfactual;
    credited.push_back(leader);
  }
  absl::StatusOr<StrengthResult> strength =
      MemorizationStrength(*scores, credited, leader);
  if (strength.ok()) {
    record.lead_margin = strength->lead_margin;
    record.strength = strength->z;
  }
  return record;
}

TemplateTexts BuildTemplateTexts(const CanaryTemplate& t,
                                 const SubjectProfile& subject,
                                 const std::vector<std::string>& labels,
                                 const std::vector<std::string>& name_variants,
                                 const AuditOptions& options) {
  TemplateTexts out;
  out.probed = options.contextualize > 0
                   ? Contextualize(t, subject, options.contextualize,
                                   options.property_label)
                   : t;
  const CanaryTemplate generic = GenericSubject(out.probed);
  for (const std::string& label : labels) {
    std::vector<std::string> texts;
    texts.reserve(2 + name_variants.size());
    texts.push_back(Instantiate(out.probed, subject.name, label));
    texts.push_back(Instantiate(generic, kGenericSubject, label));
    for (const std::string& variant : name_variants) {
      texts.push_back(Instantiate(out.probed, variant, label));
    }
    out.per_candidate.push_back(std::move(texts));
  }
  return out;
}

absl::StatusOr<std::vector<AuditRecord>> AuditPair(
    const SubjectProfile& subject, const std::string& pid,
    const std::vector<CanaryTemplate>& templates, const CandidateSet& candidates,
    LikelihoodGateway& gateway, const AuditOptions& options) {
  if (templates.empty()) {
    return absl::InvalidArgumentError(absl::StrCat("no templates for ", pid));
  }
  if (candidates.ground_truths.empty()) {
    return absl::InvalidArgumentError(absl::StrCat("no ground truths for ", pid));
  }
  const std::vector<std::string> labels = candidates.Labels();
  const std::vector<std::string> variants =
      options.name_variants == 0
          ? std::vector<std::string>{}
          : SimilarNames(subject.name, options.name_variants).variants;

  std::vector<TemplateTexts> per_template;
  std::vector<std::string> all_texts;
  for (const CanaryTemplate& t : templates) {
    per_template.push_back(
        BuildTemplateTexts(t, subject, labels, variants, options));
    for (const auto& texts : per_template.back().per_candidate) {
      all_texts.insert(all_texts.end(), texts.begin(), texts.end());
    }
  }
  std::vector<absl::StatusOr<NllResult>> results = gateway.BatchScore(all_texts);

  std::vector<AuditRecord> records;
  size_t cursor = 0;
  for (size_t ti = 0; ti < templates.size(); ++ti) {
    const CanaryTemplate& t = templates[ti];
    ScoreMatrix matrix;
    matrix.alpha = options.alpha;
    std::vector<int> token_counts;
    std::string error;
    for (size_t ci = 0; ci < labels.size(); ++ci) {
      const size_t width = per_template[ti].per_candidate[ci].size();
      std::vector<double> row;
      for (size_t k = 0; k < width; ++k) {
        const absl::StatusOr<NllResult>& r = results[cursor + k];
        if (!r.ok()) {
          if (error.empty()) error = std::string(r.status().message());
          row.push_back(0.0);
          continue;
        }
        row.push_back(r->total_nll);
        if (k == 0) token_counts.push_back(static_cast<int>(r->token_nlls.size()));
      }
      cursor += width;
      matrix.nll_subject.push_back(row[0]);
      matrix.nll_generic.push_back(row[1]);
      matrix.nll_variants.emplace_back(row.begin() + 2, row.end());
    }

    AuditRecord record;
    if (error.empty()) {
      record = ScoreTemplate(matrix, candidates, options.equivalence);
      for (size_t ci = 0; ci < record.scores.size() && ci < token_counts.size(); ++ci) {
        record.scores[ci].token_count = token_counts[ci];
      }
      FlagLengthOutliers(record, options.length_outlier_factor);
    } else {
      record.unscored = true;
      record.error = error;
    }
    record.model = gateway.model_id();
    record.subject = subject.name;
    record.qid = subject.qid;
    record.pid = pid;
    record.cohort = subject.cohort;
    record.variant_id = t.variant_id;
    record.kind = per_template[ti].probed.kind;
    records.push_back(std::move(record));
  }
  return records;
}

std::string RecordToJson(const AuditRecord& r, bool dump_scores) {
  ordered_json j;
  j["model"] = r.model;
  j["subject"] = r.subject;
  j["qid"] = r.qid;
  j["pid"] = r.pid;
  j["cohort"] = CohortName(r.cohort);
  j["variant_id"] = r.variant_id;
  j["kind"] = TemplateKindName(r.kind);
  j["memorized"] = r.memorized;
  j["top_ground_truth"] =
      r.top_ground_truth ? ordered_json(*r.top_ground_truth) : ordered_json(nullptr);
  j["lead_margin"] = OptionalNumber(r.lead_margin);
  j["strength"] = OptionalNumber(r.strength);
  ordered_json hits = ordered_json::array();
  for (const EquivalenceHit& h : r.equivalence_hits) {
    hits.push_back(ordered_json{{"counterfactual", h.counterfactual},
                                {"ground_truth", h.ground_truth},
                                {"similarity", h.similarity}});
  }
  j["equivalence_hits"] = std::move(hits);
  j["length_outliers"] = r.length_outliers;
  j["unscored"] = r.unscored;
  if (!r.error.empty()) j["error"] = r.error;
  if (dump_scores) {
    ordered_json rows = ordered_json::array();
    for (const CandidateScoreRow& row : r.scores) {
      rows.push_back(ordered_json{{"label", row.label},
                                  {"ground_truth", row.ground_truth},
                                  {"s", row.score},
                                  {"rank", row.rank},
                                  {"position", row.position},
                                  {"tokens", row.token_count}});
    }
    j["scores"] = std::move(rows);
  }
  return j.dump();
}

absl::StatusOr<AuditRecord> RecordFromJson(const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return absl::InvalidArgumentError("record is not a JSON object");
  }
  AuditRecord r;
  try {
    r.model = j.value("model", "");
    r.subject = j.at("subject").get<std::string>();
    r.qid = j.value("qid", "");
    r.pid = j.at("pid").get<std::string>();
    absl::StatusOr<Cohort> cohort = ParseCohort(j.value("cohort", ""));
    if (!cohort.ok()) return cohort.status();
    r.cohort = *cohort;
    r.variant_id = j.at("variant_id").get<int>();
    absl::StatusOr<TemplateKind> kind = ParseTemplateKind(j.value("kind", "baseline"));
    if (!kind.ok()) return kind.status();
    r.kind = *kind;
    r.memorized = j.at("memorized").get<bool>();
    if (j.contains("top_ground_truth") && j["top_ground_truth"].is_string()) {
      r.top_ground_truth = j["top_ground_truth"].get<std::string>();
    }
    r.lead_margin = ReadOptionalNumber(j, "lead_margin");
    r.strength = ReadOptionalNumber(j, "strength");
    if (j.contains("equivalence_hits")) {
      for (const json& h : j["equivalence_hits"]) {
        r.equivalence_hits.push_back({h.at("counterfactual").get<std::string>(),
                                      h.at("ground_truth").get<std::string>(),
                                      h.at("similarity").get<double>()});
      }
    }
    r.length_outliers = j.value("length_outliers", std::vector<std::string>{});
    r.unscored = j.value("unscored", false);
    r.error = j.value("error", "");
    if (j.contains("scores")) {
      for (const json& row : j["scores"]) {
        r.scores.push_back({row.at("label").get<std::string>(),
                            row.value("ground_truth", false),
                            row.at("s").get<double>(), row.value("rank", 0),
                            row.value("position", 0), row.value("tokens", 0)});
      }
    }
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("bad record: ", e.what()));
  }
  if (!r.memorized && r.strength) {
    return absl::InvalidArgumentError("record has strength but is not memorized");
  }
  return r;
}

std::string RecordsToJsonl(const std::vector<AuditRecord>& records,
                           bool dump_scores) {
  std::string out;
  for (const AuditRecord& r : records) {
    out += RecordToJson(r, dump_scores);
    out += '\n';
  }
  return out;
}

absl::StatusOr<std::vector<AuditRecord>> RecordsFromJsonl(const std::string& text) {
  std::vector<AuditRecord> records;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (NormalizeWhitespace(line).empty()) continue;
    absl::StatusOr<AuditRecord> r = RecordFromJson(line);
    if (!r.ok()) {
      return absl::InvalidArgumentError(
          absl::StrCat("records line ", line_no, ": ", r.status().message()));
    }
    records.push_back(std::move(*r));
  }
  return records;
}

void SortRecords(std::vector<AuditRecord>& records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const AuditRecord& a, const AuditRecord& b) {
                     return std::tie(a.model, a.subject, a.pid, a.variant_id) <
                            std::tie(b.model, b.subject, b.pid, b.variant_id);
                   });
}

absl::StatusOr<std::vector<SubjectEntry>> SubjectsFromJson(const std::string& text) {
  json root = json::parse(text, nullptr, false);
  if (root.is_discarded() || !root.is_array()) {
    return absl::InvalidArgumentError("subjects file must be a JSON array");
  }
  std::vector<SubjectEntry> out;
  for (size_t i = 0; i < root.size(); ++i) {
    const json& s = root[i];
    auto bad = [&](absl::string_view why) {
      return absl::InvalidArgumentError(absl::StrCat("subject ", i, ": ", why));
    };
    if (!s.is_object() || !s.contains("name") || !s["name"].is_string()) {
      return bad("needs a string \"name\"");
    }
    SubjectEntry e;
    e.profile.name = NormalizeWhitespace(s["name"].get<std::string>());
    if (e.profile.name.empty()) return bad("empty name");
    e.profile.qid = s.value("qid", "");
    auto signal = [&](const char* key) -> std::optional<double> {
      if (!s.contains(key) || !s[key].is_number()) return std::nullopt;
      return s[key].get<double>();
    };
    e.signals.pageviews = signal("pageviews");
    e.signals.article_bytes = signal("article_bytes");
    e.signals.sitelinks = signal("sitelinks");
    if (s.contains("aux_facts")) {
      if (!s["aux_facts"].is_array()) return bad("aux_facts must be an array");
      for (const json& f : s["aux_facts"]) {
        if (!f.is_array() || f.size() < 2 || !f[0].is_string() ||
            !f[1].is_string()) {
          return bad("aux_facts entries are [label, value] or [label, value, pid]");
        }
        AuxFact fact{f[0].get<std::string>(), f[1].get<std::string>(), ""};
        if (f.size() > 2 && f[2].is_string()) fact.pid = f[2].get<std::string>();
        e.profile.aux_facts.push_back(std::move(fact));
      }
    }
    if (s.contains("ground_truths")) {
      if (!s["ground_truths"].is_object()) return bad("ground_truths must be an object");
      for (const auto& [pid, values] : s["ground_truths"].items()) {
        if (!values.is_array()) return bad("ground truth lists must be arrays");
        std::vector<std::string> labels;
        for (const json& v : values) {
          if (v.is_string()) labels.push_back(v.get<std::string>());
        }
        e.ground_truths[pid] = std::move(labels);
      }
    }
    if (s.contains("cohort") && s["cohort"].is_string()) {
      absl::StatusOr<Cohort> cohort = ParseCohort(s["cohort"].get<std::string>());
      if (!cohort.ok()) return bad(cohort.status().message());
      e.profile.cohort = *cohort;
    }
    if (s.contains("web_presence") && s["web_presence"].is_number()) {
      e.profile.web_presence = s["web_presence"].get<double>();
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::string SubjectsToJson(const std::vector<SubjectEntry>& subjects) {
  ordered_json root = ordered_json::array();
  for (const SubjectEntry& e : subjects) {
    ordered_json s;
    s["name"] = e.profile.name;
    s["qid"] = e.profile.qid;
    s["pageviews"] = OptionalNumber(e.signals.pageviews);
    s["article_bytes"] = OptionalNumber(e.signals.article_bytes);
    s["sitelinks"] = OptionalNumber(e.signals.sitelinks);
    ordered_json facts = ordered_json::array();
    for (const AuxFact& f : e.profile.aux_facts) {
      ordered_json row = ordered_json::array({f.property_label, f.value_label});
      if (!f.pid.empty()) row.push_back(f.pid);
      facts.push_back(std::move(row));
    }
    s["aux_facts"] = std::move(facts);
    ordered_json gts = ordered_json::object();
    for (const auto& [pid, labels] : e.ground_truths) gts[pid] = labels;
    s["ground_truths"] = std::move(gts);
    s["cohort"] = CohortName(e.profile.cohort);
    s["web_presence"] = e.profile.web_presence;
    root.push_back(std::move(s));
  }
  return root.dump(2) + "\n";
}

absl::StatusOr<AuditRunResult> RunAudit(const AuditRunInputs& inputs,
                                        LikelihoodGateway& gateway,
                                        const AuditOptions& options) {
  AuditRunResult result;
  for (const SubjectEntry& subject : inputs.subjects) {
    for (const std::string& pid : inputs.pids) {
      auto gts = subject.ground_truths.find(pid);
      if (gts == subject.ground_truths.end() || gts->second.empty()) {
        result.warnings.push_back(absl::StrCat(
            subject.profile.name, " has no ground truth for ", pid, "; skipped"));
        continue;
      }
      auto templates = inputs.templates.find(pid);
      if (templates == inputs.templates.end() || templates->second.empty()) {
        result.warnings.push_back(absl::StrCat("no templates for ", pid));
        continue;
      }
      auto cfs = inputs.counterfactuals.find(pid);
      if (cfs == inputs.counterfactuals.end()) {
        result.warnings.push_back(absl::StrCat("no counterfactuals for ", pid));
        continue;
      }
      absl::StatusOr<CandidateSet> candidates = MakeCandidateSet(
          pid, gts->second, cfs->second, inputs.max_counterfactuals);
      if (!candidates.ok()) {
        result.warnings.push_back(std::string(candidates.status().message()));
        continue;
      }
      AuditOptions pair_options = options;
      if (auto label = inputs.property_labels.find(pid);
          label != inputs.property_labels.end()) {
        pair_options.property_label = label->second;
      }
      absl::StatusOr<std::vector<AuditRecord>> records =
          AuditPair(subject.profile, pid, templates->second, *candidates,
                    gateway, pair_options);
      if (!records.ok()) return records.status();
      for (AuditRecord& r : *records) {
        if (r.unscored) {
          result.warnings.push_back(absl::StrCat(
              subject.profile.name, " ", pid, " variant ", r.variant_id,
              " unscored: ", r.error));
        }
        result.records.push_back(std::move(r));
      }
    }
  }
  SortRecords(result.records);
  return result;
}

}  // namespace memaudit
