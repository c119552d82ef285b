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

// Python bindings for the scoring, canary and reporting operations.
// Statuses become exceptions: InvalidArgument and FailedPrecondition raise
// ValueError, NotFound raises KeyError, anything else RuntimeError.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "memaudit/audit.h"
#include "memaudit/canary.h"
#include "memaudit/ingest.h"
#include "memaudit/label_service.h"
#include "memaudit/likelihood.h"
#include "memaudit/metric.h"
#include "memaudit/report.h"

namespace py = pybind11;

namespace memaudit {
namespace {

[[noreturn]] void Raise(const absl::Status& status) {
  const std::string msg(status.message());
  switch (status.code()) {
    case absl::StatusCode::kInvalidArgument:
    case absl::StatusCode::kFailedPrecondition:
      throw py::value_error(msg);
    case absl::StatusCode::kNotFound:
      throw py::key_error(msg);
    default:
      throw std::runtime_error(msg);
  }
}

template <typename T>
T Unwrap(absl::StatusOr<T> v) {
  if (!v.ok()) Raise(v.status());
  return *std::move(v);
}

CanaryTemplate FromText(const std::string& text) {
  CanaryTemplate t;
  t.text = text;
  t.form = InferForm(text);
  return t;
}

EquivalenceProvider MakeEquivalence(
    const std::vector<std::tuple<std::string, std::string, double>>& rows,
    double threshold) {
  return rows.empty() ? EquivalenceProvider::Exact(threshold)
                      : EquivalenceProvider::FromTable(rows, threshold);
}

std::vector<double> Scores(const std::vector<double>& nll_subject,
                           const std::vector<double>& nll_generic,
                           const std::vector<std::vector<double>>& nll_variants,
                           double alpha) {
  ScoreMatrix m{nll_subject, nll_generic, nll_variants, alpha};
  if (m.nll_variants.empty()) m.nll_variants.resize(m.nll_subject.size());
  return Unwrap(CalibratedScores(m));
}

py::dict Decide(const std::vector<double>& scores,
                const std::vector<std::string>& labels,
                const std::vector<size_t>& ground_truths,
                const std::vector<std::tuple<std::string, std::string, double>>& similarity,
                double threshold) {
  if (labels.size() != scores.size()) {
    throw py::value_error("labels and scores differ in length");
  }
  for (size_t g : ground_truths) {
    if (g >= scores.size()) throw py::value_error("ground truth index out of range");
  }
  Ranking ranking = RankCandidates(scores);
  MemorizationDecision d = DecideMemorization(
      ranking, labels, ground_truths, MakeEquivalence(similarity, threshold));
  py::dict out;
  out["memorized"] = d.memorized;
  out["rank"] = ranking.rank;
  out["top_ground_truth"] =
      d.top_ground_truth ? py::cast(*d.top_ground_truth) : py::none();
  out["equivalent_counterfactual"] =
      d.equivalent_counterfactual ? py::cast(*d.equivalent_counterfactual)
                                  : py::none();
  py::list hits;
  for (const EquivalenceHit& h : d.equivalence_hits) {
    hits.append(py::make_tuple(h.counterfactual, h.ground_truth, h.similarity));
  }
  out["equivalence_hits"] = hits;
  return out;
}

py::dict Strength(const std::vector<double>& scores,
                  const std::vector<size_t>& ground_truths, size_t top) {
  StrengthResult r = Unwrap(MemorizationStrength(scores, ground_truths, top));
  py::dict out;
  out["lead_margin"] = r.lead_margin;
  out["mean_margin"] = r.mean_margin;
  out["std_margin"] = r.std_margin;
  out["z"] = r.z;
  return out;
}

std::string ContextualizeText(const std::string& text, const std::string& name,
                              const std::vector<std::vector<std::string>>& facts,
                              int k, const std::string& audited_label) {
  SubjectProfile s;
  s.name = name;
  for (const auto& f : facts) {
    if (f.size() < 2 || f.size() > 3) {
      throw py::value_error("aux fact must be [label, value] or [label, value, pid]");
    }
    s.aux_facts.push_back({f[0], f[1], f.size() == 3 ? f[2] : ""});
  }
  return Contextualize(FromText(text), s, k, audited_label).text;
}

py::dict Sample(const std::string& pid,
                const std::vector<std::pair<std::string, std::string>>& pairs,
                size_t n, uint64_t seed,
                const std::map<std::string, std::string>& labels) {
  PairSample sample{pid, {}};
  for (const auto& [human, qid] : pairs) sample.pairs.push_back({human, qid});
  sample.pairs = DeduplicateByHuman(sample.pairs);
  LabelLookup lookup = [&](const std::vector<std::string>& qids)
      -> absl::StatusOr<std::map<std::string, std::string>> {
    std::map<std::string, std::string> out;
    for (const std::string& q : qids) {
      if (auto it = labels.find(q); it != labels.end()) out[q] = it->second;
    }
    return out;
  };
  CounterfactualSet set = Unwrap(SampleCounterfactuals(sample, n, seed, lookup));
  py::dict out;
  out["human_cfs"] = set.human_cfs;
  out["value_cfs"] = set.value_cfs;
  out["seed"] = set.seed;
  out["undersized"] = set.undersized;
  out["json"] = CounterfactualsToJson({set});
  return out;
}

py::dict AggregateJsonl(const std::string& records_jsonl, const std::string& mode) {
  std::vector<AuditRecord> records = Unwrap(RecordsFromJsonl(records_jsonl));
  AggregateResult agg = Aggregate(records, Unwrap(ParseAggregationMode(mode)));
  py::dict out;
  out["table"] = FormatTable(agg.summaries);
  out["csv"] = SummariesToCsv(agg.summaries);
  out["json"] = SummariesToJson(agg.summaries);
  out["breakdown_csv"] = PropertyBreakdownToCsv(PropertyBreakdown(records));
  out["warnings"] = agg.warnings;
  return out;
}

std::vector<double> ScoreWithTable(const std::map<std::string, std::vector<double>>& table,
                                   const std::vector<std::string>& texts) {
  LikelihoodGateway gateway(std::make_unique<MockNllBackend>(table));
  std::vector<double> out;
  for (auto& r : gateway.BatchScore(texts)) out.push_back(Unwrap(std::move(r)).total_nll);
  return out;
}

}  // namespace
}  // namespace memaudit

PYBIND11_MODULE(_memaudit, m) {
  using namespace memaudit;
  m.doc() = "memaudit core";

  m.def("calibrated_scores", &Scores, py::arg("nll_subject"), py::arg("nll_generic"),
        py::arg("nll_variants") = std::vector<std::vector<double>>{},
        py::arg("alpha") = 1.0);
  m.def("rank_candidates", [](const std::vector<double>& scores) {
    Ranking r = RankCandidates(scores);
    return py::make_tuple(r.rank, r.position);
  });
  m.def("decide_memorization", &Decide, py::arg("scores"), py::arg("labels"),
        py::arg("ground_truths"),
        py::arg("similarity") =
            std::vector<std::tuple<std::string, std::string, double>>{},
        py::arg("threshold") = EquivalenceProvider::kDefaultThreshold);
  m.def("memorization_strength", &Strength, py::arg("scores"),
        py::arg("ground_truths"), py::arg("top_ground_truth"));

  m.def("classify_form",
        [](const std::string& label) { return std::string(FormName(ClassifyForm(label))); });
  m.def(
      "render_baseline",
      [](const std::string& pid, const std::string& label, const std::string& form) {
        PropertySpec p;
        p.pid = pid;
        p.label = label;
        Form f = form.empty() ? ClassifyForm(label) : Unwrap(ParseForm(form));
        return Unwrap(RenderBaseline(p, f)).text;
      },
      py::arg("pid"), py::arg("label"), py::arg("form") = "");
  m.def("instantiate", [](const std::string& text, const std::string& subject,
                          const std::string& value) {
    return Instantiate(FromText(text), subject, value);
  });
  m.def("generic_subject",
        [](const std::string& text) { return GenericSubject(FromText(text)).text; });
  m.def("contextualize", &ContextualizeText, py::arg("text"), py::arg("name"),
        py::arg("aux_facts"), py::arg("k") = kMaxContextFacts,
        py::arg("audited_label") = "");
  m.def(
      "similar_names",
      [](const std::string& name, size_t k) { return SimilarNames(name, k).variants; },
      py::arg("name"), py::arg("k") = 4);

  m.def("sample_counterfactuals", &Sample, py::arg("pid"), py::arg("pairs"),
        py::arg("n"), py::arg("seed"), py::arg("labels"));
  m.def("score_with_table", &ScoreWithTable, py::arg("table"), py::arg("texts"));
  m.def("aggregate", &AggregateJsonl, py::arg("records_jsonl"),
        py::arg("mode") = "strict");
}
