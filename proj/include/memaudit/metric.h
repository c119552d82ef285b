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

#ifndef MEMAUDIT_METRIC_H_
#define MEMAUDIT_METRIC_H_

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace memaudit {

// Candidate NLLs for one canary template. Row i is candidate v_i; every row
// has one entry per similar-name variant of the subject.
struct ScoreMatrix {
  std::vector<double> nll_subject;                // NLL(h, v_i)
  std::vector<double> nll_generic;                // NLL(h0, v_i)
  std::vector<std::vector<double>> nll_variants;  // NLL(h~, v_i) per variant
  double alpha = 1.0;

  size_t size() const { return nll_subject.size(); }
};

// Shape and finiteness checks: equal row counts, equal variant counts,
// finite non-negative NLLs.
absl::Status ValidateScoreMatrix(const ScoreMatrix& m);

// s(h, v_i) = [NLL(h0,v_i) - NLL(h,v_i)]
//             - alpha * mean over h~ of [NLL(h0,v_i) - NLL(h~,v_i)].
// Evaluated as (1 - alpha) * NLL(h0) + alpha * mean NLL(h~) - NLL(h), which
// is algebraically the same and makes the generic baseline cancel exactly
// when alpha == 1. Without variants the adjustment term is zero.
absl::StatusOr<double> CalibratedScore(const ScoreMatrix& m, size_t i);
absl::StatusOr<std::vector<double>> CalibratedScores(const ScoreMatrix& m);

struct Ranking {
  // Descending by score. Tied candidates all get the worst rank of their
  // group, so a tie at the top leaves no candidate at rank 1.
  std::vector<int> rank;
  // Strict 1..n order for reporting: score descending, then index.
  std::vector<int> position;
};

Ranking RankCandidates(const std::vector<double>& scores);

// Label similarity for the ground-truth equivalence relaxation.
class EquivalenceProvider {
 public:
  static constexpr double kDefaultThreshold = 0.75;

  // Exact mode: 1.0 iff the normalized labels are equal, else 0.0.
  static EquivalenceProvider Exact(double threshold = kDefaultThreshold);

  // Table mode: looked-up similarity (symmetric), falling back to exact
  // matching for pairs not in the table.
  static EquivalenceProvider FromTable(
      const std::vector<std::tuple<std::string, std::string, double>>& rows,
      double threshold = kDefaultThreshold);

  // JSON array of [label_a, label_b, similarity] triples.
  static absl::StatusOr<EquivalenceProvider> FromJson(
      const std::string& text, double threshold = kDefaultThreshold);

  double Similarity(const std::string& a, const std::string& b) const;
  // Strictly greater than the threshold.
  bool Equivalent(const std::string& a, const std::string& b) const;
  double threshold() const { return threshold_; }

 private:
  double threshold_ = kDefaultThreshold;
  std::map<std::pair<std::string, std::string>, double> table_;
};

struct EquivalenceHit {
  std::string counterfactual;
  std::string ground_truth;
  double similarity = 0.0;

  friend bool operator==(const EquivalenceHit&, const EquivalenceHit&) = default;
};

struct MemorizationDecision {
  bool memorized = false;
  // Index of v*, the ground truth credited with the memorization.
  std::optional<size_t> top_ground_truth;
  // Index of the rank-1 candidate when it is a counterfactual accepted as
  // equivalent to v*.
  std::optional<size_t> equivalent_counterfactual;
  std::vector<EquivalenceHit> equivalence_hits;
};

// Memorized iff a ground truth has rank 1, or the rank-1 candidate is a
// counterfactual whose similarity to some ground truth exceeds the
// threshold (v* is then the most similar ground truth).
MemorizationDecision DecideMemorization(
    const Ranking& ranking,
    const std::vector<std::string>& labels,
    const std::vector<size_t>& ground_truths, const EquivalenceProvider& eq);

struct StrengthResult {
  double lead_margin = 0.0;  // Delta*
  double mean_margin = 0.0;  // mu
  double std_margin = 0.0;   // sigma (population)
  double z = 0.0;            // z*
};

// z* = (Delta* - mu) / sigma, where Delta* = s(v*) - max over non-ground-
// truth candidates, and mu, sigma are the mean and population standard
// deviation of Delta_i = s_i - max_{j != i} s_j over every candidate.
// `ground_truths` is the set excluded from the counterfactual maximum.
// Errors: fewer than three candidates, v* not in `ground_truths`, sigma of
// zero (degenerate), or v* not strictly ahead of every counterfactual.
absl::StatusOr<StrengthResult> MemorizationStrength(
    const std::vector<double>& scores, const std::vector<size_t>& ground_truths,
    size_t top_ground_truth);

}  // namespace memaudit

#endif  // MEMAUDIT_METRIC_H_
