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
#include <map>
#include <random>
#include <set>

#include "absl/strings/str_split.h"
#include "gtest/gtest.h"
#include "json.hpp"

namespace memaudit {
namespace {

AuditRecord Rec(const std::string& subject, const std::string& pid, int variant,
                bool memorized, std::optional<double> strength = std::nullopt,
                Cohort cohort = Cohort::kWellKnown, const std::string& model = "m") {
  AuditRecord r;
  r.model = model;
  r.subject = subject;
  r.qid = "Q" + std::to_string(std::hash<std::string>{}(subject) % 1000);
  r.pid = pid;
  r.cohort = cohort;
  r.variant_id = variant;
  r.kind = variant == 0 ? TemplateKind::kBaseline : TemplateKind::kParaphrase;
  r.memorized = memorized;
  if (memorized) r.strength = strength;
  return r;
}

std::vector<AuditRecord> Pair(const std::string& subject, const std::string& pid,
                              int hits, int variants = 11) {
  std::vector<AuditRecord> out;
  for (int v = 0; v < variants; ++v) out.push_back(Rec(subject, pid, v, v < hits, 2.0));
  return out;
}

TEST(AggregateTest, StrictVersusLenient) {
  auto all = Pair("A", "P106", 11);
  auto one = Pair("B", "P106", 1);
  std::vector<AuditRecord> records = all;
  records.insert(records.end(), one.begin(), one.end());

  auto strict = Aggregate(records, AggregationMode::kStrict);
  ASSERT_EQ(strict.summaries.size(), 1u);
  const CohortSummary& s = strict.summaries[0];
  EXPECT_DOUBLE_EQ(*s.rate_all_or_nothing_pct, 50.0);  // only A counts
  EXPECT_DOUBLE_EQ(*s.mean_rate, (100.0 + 100.0 / 11.0) / 2.0);
  EXPECT_EQ(s.zero_subjects, 1);

  auto lenient = Aggregate(records, AggregationMode::kLenient);
  const CohortSummary& l = lenient.summaries[0];
  EXPECT_DOUBLE_EQ(*l.mean_rate, 100.0);  // B's single success counts
  EXPECT_EQ(l.zero_subjects, 0);
  EXPECT_TRUE(strict.warnings.empty());
}

TEST(AggregateTest, HandComputedTwoByTwo) {
  // A/P1 3 of 3, A/P2 1 of 3, B/P1 0 of 3, B/P2 1 of 3.
  std::vector<AuditRecord> r = {
      Rec("A", "P1", 0, true, 2.0), Rec("A", "P1", 1, true, 4.0), Rec("A", "P1", 2, true, 6.0),
      Rec("A", "P2", 0, true, 3.0), Rec("A", "P2", 1, false),     Rec("A", "P2", 2, false),
      Rec("B", "P1", 0, false),     Rec("B", "P1", 1, false),     Rec("B", "P1", 2, false),
      Rec("B", "P2", 0, false),     Rec("B", "P2", 1, true, 5.0), Rec("B", "P2", 2, false),
  };
  CohortSummary strict = Aggregate(r, AggregationMode::kStrict).summaries.at(0);
  EXPECT_NEAR(*strict.mean_rate, (100.0 + 100.0 / 3 + 0 + 100.0 / 3) / 4, 1e-12);
  EXPECT_NEAR(*strict.rate_mean_pct, 41.666666666666664, 1e-12);
  EXPECT_DOUBLE_EQ(*strict.rate_all_or_nothing_pct, 25.0);
  EXPECT_DOUBLE_EQ(*strict.mean_strength, 4.0);
  EXPECT_EQ(strict.zero_subjects, 1);
  EXPECT_EQ(strict.cohort_size, 2);
  EXPECT_EQ(strict.pairs, 4);
  EXPECT_EQ(strict.records, 12);

  CohortSummary lenient = Aggregate(r, AggregationMode::kLenient).summaries.at(0);
  EXPECT_DOUBLE_EQ(*lenient.mean_rate, 75.0);
  EXPECT_NEAR(*lenient.rate_mean_pct, 41.666666666666664, 1e-12);
  EXPECT_DOUBLE_EQ(*lenient.mean_strength, 4.0);
  EXPECT_EQ(lenient.zero_subjects, 0);
}

TEST(AggregateTest, UnscoredAndIncomplete) {
  auto r = Pair("A", "P1", 3, 3);
  auto b = Pair("B", "P1", 0, 3);
  r.insert(r.end(), b.begin(), b.end());
  r[1].unscored = true;
  r[1].memorized = false;
  r.push_back(r[3]);  // duplicate of B variant 0
  auto result = Aggregate(r, AggregationMode::kStrict);
  const CohortSummary& s = result.summaries.at(0);
  EXPECT_EQ(s.excluded_records, 1);
  EXPECT_EQ(s.incomplete_pairs, 1);
  EXPECT_EQ(s.records, 7);
  EXPECT_DOUBLE_EQ(*s.mean_rate, 50.0);  // A: 2/2 scored variants
  EXPECT_EQ(result.warnings.size(), 3u);
}

TEST(AggregateTest, SplitsByModelAndCohort) {
  std::vector<AuditRecord> r = {
      Rec("A", "P1", 0, true, 1.0, Cohort::kWellKnown, "m2"),
      Rec("B", "P1", 0, false, std::nullopt, Cohort::kLesserKnown, "m2"),
      Rec("A", "P1", 0, false, std::nullopt, Cohort::kWellKnown, "m1"),
  };
  auto result = Aggregate(r, AggregationMode::kStrict);
  ASSERT_EQ(result.summaries.size(), 3u);
  EXPECT_EQ(result.summaries[0].model, "m1");
  EXPECT_EQ(result.summaries[1].cohort, "lesser-known");
  EXPECT_EQ(result.summaries[2].cohort, "well-known");
  EXPECT_FALSE(result.summaries[0].mean_strength.has_value());
  EXPECT_EQ(FormatTableRow(result.summaries[0]), "m1 | well-known | 0.00 | n/a | 1/1");
}

// Per-pair rates recomputed without the library.
struct Recount {
  double strict_mean = 0, lenient_mean = 0;
  int64_t strict_zero = 0, lenient_zero = 0;
};

Recount BruteForce(const std::vector<AuditRecord>& records) {
  std::map<std::pair<std::string, std::string>, std::pair<int, int>> cells;
  std::set<std::string> subjects;
  for (const auto& r : records) {
    auto& c = cells[{r.subject, r.pid}];
    c.first += r.memorized;
    c.second += 1;
    subjects.insert(r.subject);
  }
  Recount out;
  std::set<std::string> strict_hit, lenient_hit;
  for (const auto& [k, c] : cells) {
    out.strict_mean += 100.0 * c.first / c.second;
    out.lenient_mean += c.first > 0 ? 100.0 : 0.0;
    if (c.first == c.second) strict_hit.insert(k.first);
    if (c.first > 0) lenient_hit.insert(k.first);
  }
  out.strict_mean /= cells.size();
  out.lenient_mean /= cells.size();
  out.strict_zero = subjects.size() - strict_hit.size();
  out.lenient_zero = subjects.size() - lenient_hit.size();
  return out;
}

std::vector<AuditRecord> RandomRecords(std::mt19937_64& rng) {
  std::vector<AuditRecord> out;
  const int subjects = 1 + rng() % 8;
  const int pids = 1 + rng() % 5;
  const int variants = 1 + rng() % 11;
  const double bias = (rng() % 100) / 100.0;
  for (int s = 0; s < subjects; ++s) {
    for (int p = 0; p < pids; ++p) {
      for (int v = 0; v < variants; ++v) {
        const bool hit = (rng() % 1000) / 1000.0 < bias;
        out.push_back(Rec("S" + std::to_string(s), "P" + std::to_string(p), v, hit,
                          static_cast<double>(rng() % 50) / 7.0));
      }
    }
  }
  return out;
}

TEST(AggregateTest, RandomRecountAndOrdering) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    auto records = RandomRecords(rng);
    const Recount want = BruteForce(records);
    CohortSummary strict = Aggregate(records, AggregationMode::kStrict).summaries.at(0);
    CohortSummary lenient = Aggregate(records, AggregationMode::kLenient).summaries.at(0);
    EXPECT_NEAR(*strict.mean_rate, want.strict_mean, 1e-9);
    EXPECT_NEAR(*lenient.mean_rate, want.lenient_mean, 1e-9);
    EXPECT_EQ(strict.zero_subjects, want.strict_zero);
    EXPECT_EQ(lenient.zero_subjects, want.lenient_zero);
    EXPECT_GE(*lenient.mean_rate, *strict.mean_rate);
    EXPECT_LE(lenient.zero_subjects, strict.zero_subjects);
    EXPECT_LE(strict.zero_subjects, strict.cohort_size);

    std::shuffle(records.begin(), records.end(), rng);
    EXPECT_EQ(Aggregate(records, AggregationMode::kStrict).summaries.at(0), strict);
  }
}

CohortSummary TableOneRow(const std::string& model, const std::string& cohort, double rate,
                          double strength, int zero) {
  CohortSummary s;
  s.model = model;
  s.cohort = cohort;
  s.mean_rate = rate;
  s.rate_mean_pct = rate;
  s.rate_all_or_nothing_pct = rate / 2;
  s.mean_strength = strength;
  s.zero_subjects = zero;
  s.cohort_size = 100;
  s.pairs = 500;
  s.records = 5500;
  return s;
}

TEST(TableTest, RowShapes) {
  EXPECT_EQ(FormatTableRow(TableOneRow("LLaMA 3.1-8B", "well-known", 38.84, 3.38, 1)),
            "LLaMA 3.1-8B | well-known | 38.84 | 3.38 | 1/100");
  EXPECT_EQ(FormatTableRow(TableOneRow("Pythia-410M", "lesser-known", 4.38, 2.51, 31)),
            "Pythia-410M | lesser-known | 4.38 | 2.51 | 31/100");
  std::string table = FormatTable({TableOneRow("LLaMA 3.1-8B", "well-known", 38.84, 3.38, 1)});
  std::vector<std::string> lines = absl::StrSplit(table, '\n');
  EXPECT_EQ(lines[0], "model | cohort | M̄(%) | z̄* | H_{M=0}/N");
  EXPECT_EQ(lines[1], "LLaMA 3.1-8B | well-known | 38.84 | 3.38 | 1/100");
  EXPECT_NE(table.find("\n# "), std::string::npos);
}

TEST(TableTest, EmptyGuard) {
  EXPECT_EQ(FormatTable({}),
            "model | cohort | M̄(%) | z̄* | H_{M=0}/N\nn/a | n/a | n/a | n/a | n/a\n");
  CohortSummary empty;
  empty.model = "m";
  empty.cohort = "well-known";
  EXPECT_EQ(FormatTableRow(empty), "m | well-known | n/a | n/a | 0/0");
  EXPECT_EQ(Aggregate({}, AggregationMode::kStrict).summaries.size(), 0u);
}

TEST(SerializationTest, CsvAndJsonRoundTrip) {
  std::vector<CohortSummary> s = {TableOneRow("LLaMA 3.1-8B", "well-known", 38.84, 3.38, 1),
                                  TableOneRow("a,\"b\"", "lesser-known", 1.0 / 3, 0.1, 99)};
  s[1].mode = AggregationMode::kLenient;
  s[1].mean_strength.reset();
  s[1].excluded_records = 4;
  s[1].incomplete_pairs = 2;
  auto csv = SummariesFromCsv(SummariesToCsv(s));
  ASSERT_TRUE(csv.ok()) << csv.status();
  EXPECT_EQ(*csv, s);
  auto js = SummariesFromJson(SummariesToJson(s));
  ASSERT_TRUE(js.ok()) << js.status();
  EXPECT_EQ(*js, s);
  EXPECT_EQ(SummariesToCsv(s).substr(0, SummariesToCsv(s).find('\n')),
            "model,cohort,mode,mean_rate_pct,rate_mean_pct,rate_all_or_nothing_pct,"
            "mean_strength,zero_subjects,cohort_size,pairs,records,excluded_records,"
            "incomplete_pairs");
  EXPECT_EQ(nlohmann::json::parse(SummariesToJson(s))["schema_version"], 1);
  EXPECT_FALSE(SummariesFromJson("{\"schema_version\":2,\"summaries\":[]}").ok());
  EXPECT_FALSE(SummariesFromCsv("model,cohort\nx,y\n").ok());
}

TEST(BreakdownTest, FiftyFiveRowsMatchRecount) {
  std::mt19937_64 rng(5);
  std::vector<AuditRecord> records;
  const std::vector<std::string> pids = {"P106", "P1412", "P19", "P21", "P27"};
  std::map<std::tuple<std::string, int>, std::pair<int, int>> want;
  for (int s = 0; s < 9; ++s) {
    for (const auto& pid : pids) {
      for (int v = 0; v < 11; ++v) {
        const bool hit = rng() % 3 == 0;
        records.push_back(Rec("S" + std::to_string(s), pid, v, hit, 1.0));
        auto& c = want[{pid, v}];
        c.first += hit;
        c.second += 1;
      }
    }
  }
  std::shuffle(records.begin(), records.end(), rng);
  auto rows = PropertyBreakdown(records);
  ASSERT_EQ(rows.size(), 55u);
  for (const auto& row : rows) {
    auto c = want.at({row.pid, row.variant_id});
    EXPECT_EQ(row.memorized, c.first);
    EXPECT_EQ(row.scored, c.second);
    EXPECT_DOUBLE_EQ(row.rate_pct, 100.0 * c.first / c.second);
    EXPECT_GE(row.rate_pct, 0.0);
    EXPECT_LE(row.rate_pct, 100.0);
  }
  std::string csv = PropertyBreakdownToCsv(rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 56);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "model,pid,variant_id,memorized,scored,rate_pct");

  // A property absent from the run contributes no rows.
  records.erase(std::remove_if(records.begin(), records.end(),
                               [](const AuditRecord& r) { return r.pid == "P19"; }),
                records.end());
  EXPECT_EQ(PropertyBreakdown(records).size(), 44u);
}

SubjectEntry Signals(const std::string& name, std::optional<double> pv,
                     std::optional<double> bytes, std::optional<double> links) {
  SubjectEntry e;
  e.profile.name = name;
  e.signals = {pv, bytes, links};
  return e;
}

TEST(CohortSplitTest, Extremes) {
  auto r = CohortSplit({Signals("top", 100, 100, 100), Signals("mid", 50, 60, 70),
                        Signals("bottom", 1, 1, 1)});
  ASSERT_EQ(r.assignments.size(), 3u);
  EXPECT_DOUBLE_EQ(*r.assignments[0].composite, 1.0);
  EXPECT_EQ(r.assignments[0].cohort, Cohort::kWellKnown);
  EXPECT_DOUBLE_EQ(*r.assignments[2].composite, 0.0);
  EXPECT_EQ(r.assignments[2].cohort, Cohort::kLesserKnown);
  EXPECT_EQ(r.assignments[1].cohort, Cohort::kWellKnown);  // ceil(3/2) = 2
}

TEST(CohortSplitTest, TenSubjectHandRanking) {
  const double pv[] = {120, 5000, 800, 40, 2600, 15000, 300, 900, 7000, 60};
  const double ab[] = {9000, 42000, 15000, 3000, 30000, 80000, 4000, 25000, 12000, 3500};
  const double sl[] = {4, 60, 12, 2, 35, 110, 30, 8, 45, 3};
  std::vector<SubjectEntry> subjects;
  for (int i = 0; i < 10; ++i) subjects.push_back(Signals("S" + std::to_string(i), pv[i], ab[i], sl[i]));
  subjects.push_back(Signals("no views", std::nullopt, 1000, 2));
  auto r = CohortSplit(subjects);
  // Ranked by hand: 5, 1, 8, 4, 7 | 2, 6, 0, 9, 3.
  const std::set<int> well_known = {5, 1, 8, 4, 7};
  for (int i = 0; i < 10; ++i) {
    EXPECT_EQ(r.assignments[i].cohort,
              well_known.count(i) ? Cohort::kWellKnown : Cohort::kLesserKnown)
        << "subject " << i;
  }
  EXPECT_NEAR(*r.assignments[1].composite, 0.4484, 1e-4);
  EXPECT_NEAR(*r.assignments[7].composite, 0.0970, 1e-4);
  EXPECT_DOUBLE_EQ(*r.assignments[3].composite, 0.0);
  EXPECT_EQ(r.assignments[10].cohort, Cohort::kUnassigned);
  EXPECT_FALSE(r.assignments[10].composite.has_value());
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(CohortSplitTest, ConstantSignalAndSampling) {
  std::vector<SubjectEntry> subjects;
  for (int i = 0; i < 40; ++i) subjects.push_back(Signals("S" + std::to_string(i), i, 5, i * 2));
  auto r = CohortSplit(subjects);
  EXPECT_DOUBLE_EQ(*r.assignments[39].composite, 1.0);
  EXPECT_EQ(r.assignments[20].cohort, Cohort::kWellKnown);
  EXPECT_EQ(r.assignments[19].cohort, Cohort::kLesserKnown);

  CohortSplitOptions options;
  options.sample_per_cohort = 5;
  options.seed = 9;
  auto a = CohortSplit(subjects, options);
  auto b = CohortSplit(subjects, options);
  int well = 0, lesser = 0;
  for (size_t i = 0; i < a.assignments.size(); ++i) {
    EXPECT_EQ(a.assignments[i].cohort, b.assignments[i].cohort);
    if (a.assignments[i].cohort == Cohort::kWellKnown) {
      ++well;
      EXPECT_GE(i, 20u);
    }
    if (a.assignments[i].cohort == Cohort::kLesserKnown) {
      ++lesser;
      EXPECT_LT(i, 20u);
    }
  }
  EXPECT_EQ(well, 5);
  EXPECT_EQ(lesser, 5);
}

}  // namespace
}  // namespace memaudit
