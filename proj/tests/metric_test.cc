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

#include "memaudit/metric.h"

#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "oracle/metric_oracle.h"
#include "oracle/random_matrix.h"

namespace memaudit {
namespace {

ScoreMatrix OneRow(double subject, double generic, std::vector<double> variants,
                   double alpha) {
  return ScoreMatrix{{subject}, {generic}, {std::move(variants)}, alpha};
}

TEST(CalibratedScoreTest, HandEvaluated) {
  EXPECT_DOUBLE_EQ(*CalibratedScore(OneRow(7, 10, {9}, 1.0), 0), 2.0);
  EXPECT_DOUBLE_EQ(*CalibratedScore(OneRow(4, 4, {4, 4}, 1.0), 0), 0.0);
  EXPECT_DOUBLE_EQ(*CalibratedScore(OneRow(7, 10, {9}, 0.0), 0), 3.0);
}

TEST(CalibratedScoreTest, NoVariantsMeansNoAdjustment) {
  EXPECT_DOUBLE_EQ(*CalibratedScore(OneRow(7, 10, {}, 1.0), 0), 3.0);
}

TEST(CalibratedScoreTest, RejectsBadMatrices) {
  EXPECT_EQ(CalibratedScore(OneRow(NAN, 1, {}, 1), 0).status().code(),
            absl::StatusCode::kInvalidArgument);
  EXPECT_EQ(CalibratedScores(OneRow(1, -1, {}, 1)).status().code(),
            absl::StatusCode::kInvalidArgument);
  ScoreMatrix ragged{{1, 2}, {1, 2}, {{1}, {1, 2}}, 1};
  EXPECT_FALSE(ValidateScoreMatrix(ragged).ok());
  ScoreMatrix short_rows{{1, 2}, {1}, {{}, {}}, 1};
  EXPECT_FALSE(ValidateScoreMatrix(short_rows).ok());
  EXPECT_FALSE(CalibratedScore(OneRow(1, 1, {}, 1), 3).ok());
}

TEST(CalibratedScoreTest, GenericCancelsBitwiseAtAlphaOne) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> nll(0.0, 80.0);
  for (int trial = 0; trial < 100; ++trial) {
    ScoreMatrix m;
    m.alpha = 1.0;
    for (int i = 0; i < 12; ++i) {
      m.nll_subject.push_back(nll(rng));
      m.nll_generic.push_back(nll(rng));
      m.nll_variants.push_back({nll(rng), nll(rng), nll(rng), nll(rng)});
    }
    std::vector<double> before = *CalibratedScores(m);
    for (double& g : m.nll_generic) g = nll(rng);
    std::vector<double> after = *CalibratedScores(m);
    for (size_t i = 0; i < before.size(); ++i) {
      ASSERT_EQ(std::memcmp(&before[i], &after[i], sizeof(double)), 0);
    }
  }
}

TEST(CalibratedScoreTest, ShiftingSubjectShiftsScores) {
  ScoreMatrix m{{3, 5, 9}, {6, 6, 6}, {{4}, {5}, {7}}, 1.0};
  std::vector<double> a = *CalibratedScores(m);
  for (double& h : m.nll_subject) h += 2.5;
  std::vector<double> b = *CalibratedScores(m);
  for (size_t i = 0; i < a.size(); ++i) EXPECT_DOUBLE_EQ(b[i], a[i] - 2.5);
  EXPECT_EQ(RankCandidates(a).rank, RankCandidates(b).rank);
}

TEST(RankTest, StrictOrder) {
  Ranking r = RankCandidates({5, 2, 1});
  EXPECT_EQ(r.rank, (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(r.position, (std::vector<int>{1, 2, 3}));
}

TEST(RankTest, TiesTakeWorstRank) {
  Ranking r = RankCandidates({4, 4, 1});
  EXPECT_EQ(r.rank, (std::vector<int>{2, 2, 3}));
  EXPECT_EQ(r.position, (std::vector<int>{1, 2, 3}));
  Ranking all = RankCandidates({1, 1, 1, 1});
  EXPECT_EQ(all.rank, (std::vector<int>{4, 4, 4, 4}));
}

TEST(RankTest, PositionsArePermutation) {
  Ranking r = RankCandidates({0.5, 3, 0.5, -1, 3});
  EXPECT_EQ(r.position, (std::vector<int>{3, 1, 4, 5, 2}));
  EXPECT_EQ(r.rank, (std::vector<int>{4, 2, 4, 5, 2}));
}

TEST(DecideTest, GroundTruthAtRankOne) {
  std::vector<std::string> labels = {"biologist", "chemist", "lawyer"};
  MemorizationDecision d = DecideMemorization(RankCandidates({3, 2, 1}), labels,
                                              {0}, EquivalenceProvider::Exact());
  EXPECT_TRUE(d.memorized);
  EXPECT_EQ(d.top_ground_truth, 0u);
  EXPECT_TRUE(d.equivalence_hits.empty());
}

TEST(DecideTest, TieAtTopIsNotMemorized) {
  std::vector<std::string> labels = {"biologist", "chemist", "lawyer"};
  MemorizationDecision d = DecideMemorization(RankCandidates({3, 3, 1}), labels,
                                              {0}, EquivalenceProvider::Exact());
  EXPECT_FALSE(d.memorized);
}

TEST(DecideTest, EquivalenceThreshold) {
  std::vector<std::string> labels = {"English", "British English", "French"};
  Ranking r = RankCandidates({1, 3, 2});
  auto high = EquivalenceProvider::FromTable({{"English", "British English", 0.8}});
  MemorizationDecision d = DecideMemorization(r, labels, {0}, high);
  EXPECT_TRUE(d.memorized);
  EXPECT_EQ(d.top_ground_truth, 0u);
  EXPECT_EQ(d.equivalent_counterfactual, 1u);
  ASSERT_EQ(d.equivalence_hits.size(), 1u);
  EXPECT_EQ(d.equivalence_hits[0].counterfactual, "British English");
  EXPECT_DOUBLE_EQ(d.equivalence_hits[0].similarity, 0.8);

  auto low = EquivalenceProvider::FromTable({{"British English", "English", 0.6}});
  EXPECT_FALSE(DecideMemorization(r, labels, {0}, low).memorized);
  auto exactly = EquivalenceProvider::FromTable({{"English", "British English", 0.75}});
  EXPECT_FALSE(DecideMemorization(r, labels, {0}, exactly).memorized);
}

TEST(EquivalenceTest, ExactModeAndSymmetry) {
  auto exact = EquivalenceProvider::Exact();
  EXPECT_EQ(exact.Similarity("New  York", "new york"), 1.0);
  EXPECT_EQ(exact.Similarity("York", "New York"), 0.0);
  auto table = EquivalenceProvider::FromTable({{"a", "b", 0.9}});
  EXPECT_EQ(table.Similarity("b", "a"), 0.9);
  EXPECT_EQ(table.Similarity("a", "a"), 1.0);
  EXPECT_EQ(table.Similarity("a", "c"), 0.0);
}

TEST(EquivalenceTest, FromJson) {
  auto eq = EquivalenceProvider::FromJson(R"([["English", "British English", 0.8]])");
  ASSERT_TRUE(eq.ok());
  EXPECT_TRUE(eq->Equivalent("British English", "English"));
  EXPECT_FALSE(EquivalenceProvider::FromJson(R"({"a": 1})").ok());
  EXPECT_FALSE(EquivalenceProvider::FromJson(R"([["a", "b", 1.5]])").ok());
}

TEST(StrengthTest, WorkedCases) {
  auto a = MemorizationStrength({5, 2, 1}, {0}, 0);
  ASSERT_TRUE(a.ok());
  EXPECT_DOUBLE_EQ(a->lead_margin, 3.0);
  EXPECT_NEAR(a->mean_margin, -4.0 / 3.0, 1e-12);
  EXPECT_NEAR(a->std_margin, std::sqrt(86.0 / 9.0), 1e-12);
  EXPECT_NEAR(a->z, 1.402, 1e-3);

  std::vector<double> b(101, 1.0);
  b[0] = 2.0;
  auto bz = MemorizationStrength(b, {0}, 0);
  ASSERT_TRUE(bz.ok());
  EXPECT_NEAR(bz->z, 10.0, 1e-9);
}

TEST(StrengthTest, Errors) {
  EXPECT_EQ(MemorizationStrength({1, 2}, {0}, 0).status().code(),
            absl::StatusCode::kInvalidArgument);
  EXPECT_EQ(MemorizationStrength({3, 2, 1}, {0}, 1).status().code(),
            absl::StatusCode::kInvalidArgument);
  EXPECT_EQ(MemorizationStrength({1, 2, 0}, {0}, 0).status().code(),
            absl::StatusCode::kFailedPrecondition);
}

TEST(StrengthTest, AllEqualIsDegenerate) {
  auto r = MemorizationStrength({1, 1, 1}, {0}, 0);
  EXPECT_EQ(r.status().code(), absl::StatusCode::kInvalidArgument);
  EXPECT_NE(r.status().message().find("degenerate"), absl::string_view::npos);
}

TEST(StrengthTest, AffineInvariance) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s;
    for (int i = 0; i < 15; ++i) s.push_back(u(rng));
    s[0] = 20;
    auto base = MemorizationStrength(s, {0}, 0);
    ASSERT_TRUE(base.ok());
    for (double& x : s) x = 3.7 * x - 11;
    auto moved = MemorizationStrength(s, {0}, 0);
    ASSERT_TRUE(moved.ok());
    EXPECT_NEAR(base->z, moved->z, 1e-9);
  }
}

TEST(StrengthTest, MultipleGroundTruthsExcludedFromCompetitors) {
  // gt 0 leads; gt 1 sits just under it and must not count as a rival.
  auto r = MemorizationStrength({5, 4.9, 1, 0}, {0, 1}, 0);
  ASSERT_TRUE(r.ok());
  EXPECT_DOUBLE_EQ(r->lead_margin, 4.0);
}

TEST(OracleTest, LatticeAgreesBitwise) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    oracle::LatticeCase c = oracle::RandomLatticeCase(rng);
    std::vector<double> s = *CalibratedScores(c.ToMatrix());
    std::vector<int64_t> want;
    for (size_t i = 0; i < s.size(); ++i) {
      want.push_back(oracle::LatticeScore32(c.h8[i], c.g8[i], c.v8[i], c.alpha4));
      ASSERT_EQ(s[i] * 32.0, static_cast<double>(want[i])) << "trial " << trial;
    }
    EXPECT_EQ(RankCandidates(s).rank, oracle::Ranks(want));
  }
}

}  // namespace
}  // namespace memaudit
