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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "absl/strings/str_cat.h"
#include "json.hpp"
#include "memaudit/text.h"

namespace memaudit {

absl::Status ValidateScoreMatrix(const ScoreMatrix& m) {
  const size_t n = m.nll_subject.size();
  if (m.nll_generic.size() != n || m.nll_variants.size() != n) {
    return absl::InvalidArgumentError(absl::StrCat(
        "score matrix rows disagree: subject ", n, ", generic ",
        m.nll_generic.size(), ", variants ", m.nll_variants.size()));
  }
  if (!std::isfinite(m.alpha)) {
    return absl::InvalidArgumentError("alpha is not finite");
  }
  const size_t width = n == 0 ? 0 : m.nll_variants.front().size();
  auto check = [](double v) { return std::isfinite(v) && v >= 0.0; };
  for (size_t i = 0; i < n; ++i) {
    if (m.nll_variants[i].size() != width) {
      return absl::InvalidArgumentError(
          absl::StrCat("candidate ", i, " has ", m.nll_variants[i].size(),
                       " variant NLLs, expected ", width));
    }
    if (!check(m.nll_subject[i]) || !check(m.nll_generic[i]) ||
        !std::all_of(m.nll_variants[i].begin(), m.nll_variants[i].end(), check)) {
      return absl::InvalidArgumentError(
          absl::StrCat("candidate ", i, " has a non-finite or negative NLL"));
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<double> CalibratedScore(const ScoreMatrix& m, size_t i) {
  if (i >= m.size()) {
    return absl::OutOfRangeError(absl::StrCat("no candidate ", i));
  }
  if (m.nll_generic.size() <= i || m.nll_variants.size() <= i) {
    return absl::InvalidArgumentError("score matrix row is incomplete");
  }
  const double subject = m.nll_subject[i];
  const double generic = m.nll_generic[i];
  const std::vector<double>& variants = m.nll_variants[i];
  if (!std::isfinite(subject) || !std::isfinite(generic) ||
      !std::all_of(variants.begin(), variants.end(),
                   [](double v) { return std::isfinite(v); })) {
    return absl::InvalidArgumentError(
        absl::StrCat("candidate ", i, " has a non-finite NLL"));
  }
  if (variants.empty()) return generic - subject;
  double variant_sum = 0.0;
  for (double v : variants) variant_sum += v;
  const double variant_mean = variant_sum / static_cast<double>(variants.size());
  return (1.0 - m.alpha) * generic + m.alpha * variant_mean - subject;
}

absl::StatusOr<std::vector<double>> CalibratedScores(const ScoreMatrix& m) {
  if (absl::Status s = ValidateScoreMatrix(m); !s.ok()) return s;
  std::vector<double> scores(m.size());
  for (size_t i = 0; i < m.size(); ++i) {
    absl::StatusOr<double> s = CalibratedScore(m, i);
    if (!s.ok()) return s.status();
    scores[i] = *s;
  }
  return scores;
}

Ranking RankCandidates(const std::vector<double>& scores) {
  const size_t n = scores.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return scores[a] > scores[b];
  });
  Ranking r;
  r.rank.assign(n, 0);
  r.position.assign(n, 0);
  size_t group_start = 0;
  while (group_start < n) {
    size_t group_end = group_start + 1;
    while (group_end < n && scores[order[group_end]] == scores[order[group_start]]) {
      ++group_end;
    }
    for (size_t k = group_start; k < group_end; ++k) {
      r.rank[order[k]] = static_cast<int>(group_end);
      r.position[order[k]] = static_cast<int>(k + 1);
    }
    group_start = group_end;
  }
  return r;
}

EquivalenceProvider EquivalenceProvider::Exact(double threshold) {
  EquivalenceProvider p;
  p.threshold_ = threshold;
  return p;
}

EquivalenceProvider EquivalenceProvider::FromTable(
    const std::vector<std::tuple<std::string, std::string, double>>& rows,
    double threshold) {
  EquivalenceProvider p;
  p.threshold_ = threshold;
  for (const auto& [a, b, sim] : rows) {
    std::string na = NormalizeLabel(a);
    std::string nb = NormalizeLabel(b);
    if (nb < na) std::swap(na, nb);
    p.table_[{na, nb}] = sim;
  }
  return p;
}

absl::StatusOr<EquivalenceProvider> EquivalenceProvider::FromJson(
    const std::string& text, double threshold) {
  nlohmann::json root = nlohmann::json::parse(text, nullptr, false);
  if (root.is_discarded() || !root.is_array()) {
    return absl::InvalidArgumentError(
        "similarity table must be a JSON array of [a, b, similarity]");
  }
  std::vector<std::tuple<std::string, std::string, double>> rows;
  for (const auto& row : root) {
    if (!row.is_array() || row.size() != 3 || !row[0].is_string() ||
        !row[1].is_string() || !row[2].is_number()) {
      return absl::InvalidArgumentError(
          absl::StrCat("bad similarity row ", row.dump()));
    }
    double sim = row[2].get<double>();
    if (!(sim >= 0.0 && sim <= 1.0)) {
      return absl::InvalidArgumentError(
          absl::StrCat("similarity outside [0,1]: ", row.dump()));
    }
    rows.emplace_back(row[0].get<std::string>(), row[1].get<std::string>(), sim);
  }
  return FromTable(rows, threshold);
}

double EquivalenceProvider::Similarity(const std::string& a,
                                       const std::string& b) const {
  std::string na = NormalizeLabel(a);
  std::string nb = NormalizeLabel(b);
  if (na == nb) return 1.0;
  if (nb < na) std::swap(na, nb);
  auto it = table_.find({na, nb});
  return it == table_.end() ? 0.0 : it->second;
}

bool EquivalenceProvider::Equivalent(const std::string& a,
                                     const std::string& b) const {
  return Similarity(a, b) > threshold_;
}

MemorizationDecision DecideMemorization(
    const Ranking& ranking,
    const std::vector<std::string>& labels,
    const std::vector<size_t>& ground_truths, const EquivalenceProvider& eq) {
  MemorizationDecision d;
  for (size_t g : ground_truths) {
    if (g < ranking.rank.size() && ranking.rank[g] == 1) {
      d.memorized = true;
      d.top_ground_truth = g;
      return d;
    }
  }
  // With pessimistic ties at most one candidate can hold rank 1.
  std::optional<size_t> leader;
  for (size_t i = 0; i < ranking.rank.size(); ++i) {
    if (ranking.rank[i] == 1) leader = i;
  }
  if (!leader || *leader >= labels.size()) return d;

  std::optional<size_t> best_gt;
  double best_sim = 0.0;
  for (size_t g : ground_truths) {
    if (g >= labels.size()) continue;
    double sim = eq.Similarity(labels[*leader], labels[g]);
    if (sim > eq.threshold() && (!best_gt || sim > best_sim)) {
      best_gt = g;
      best_sim = sim;
    }
  }
  if (best_gt) {
    d.memorized = true;
    d.top_ground_truth = best_gt;
    d.equivalent_counterfactual = leader;
    d.equivalence_hits.push_back({labels[*leader], labels[*best_gt], best_sim});
  }
  return d;
}

absl::StatusOr<StrengthResult> MemorizationStrength(
    const std::vector<double>& scores, const std::vector<size_t>& ground_truths,
    size_t top_ground_truth) {
  const size_t n = scores.size();
  if (n < 3) {
    return absl::InvalidArgumentError(
        absl::StrCat("strength needs at least 3 candidates, got ", n));
  }
  std::vector<bool> is_gt(n, false);
  for (size_t g : ground_truths) {
    if (g >= n) return absl::InvalidArgumentError("ground truth index out of range");
    is_gt[g] = true;
  }
  if (top_ground_truth >= n || !is_gt[top_ground_truth]) {
    return absl::InvalidArgumentError("v* is not a ground truth");
  }

  // Largest and second-largest score give max_{j != i} for every i.
  size_t first = 0;
  for (size_t i = 1; i < n; ++i) {
    if (scores[i] > scores[first]) first = i;
  }
  size_t second = first == 0 ? 1 : 0;
  for (size_t i = 0; i < n; ++i) {
    if (i != first && scores[i] > scores[second]) second = i;
  }
  std::vector<double> margins(n);
  for (size_t i = 0; i < n; ++i) {
    margins[i] = scores[i] - scores[i == first ? second : first];
  }
  double sum = 0.0;
  for (double d : margins) sum += d;
  const double mu = sum / static_cast<double>(n);
  double sq = 0.0;
  for (double d : margins) sq += (d - mu) * (d - mu);
  const double sigma = std::sqrt(sq / static_cast<double>(n));
  if (!(sigma > 0.0)) {
    return absl::InvalidArgumentError(
        "degenerate lead-margin distribution (sigma = 0)");
  }

  bool have_cf = false;
  double best_cf = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (is_gt[i]) continue;
    if (!have_cf || scores[i] > best_cf) best_cf = scores[i];
    have_cf = true;
  }
  if (!have_cf) {
    return absl::InvalidArgumentError("no counterfactual candidates");
  }
  const double lead = scores[top_ground_truth] - best_cf;
  if (!(lead > 0.0)) {
    return absl::FailedPreconditionError(absl::StrCat(
        "v* does not lead every counterfactual (lead margin ", lead, ")"));
  }
  return StrengthResult{lead, mu, sigma, (lead - mu) / sigma};
}

}  // namespace memaudit
