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

#ifndef MEMAUDIT_CANARY_H_
#define MEMAUDIT_CANARY_H_

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "memaudit/wikidata.h"

namespace memaudit {

inline constexpr std::string_view kSubjectPlaceholder = "HUMAN_SUBJECT";
inline constexpr std::string_view kValuePlaceholder = "PROTECTED_VALUE";
inline constexpr std::string_view kGenericSubject = "This person";
inline constexpr int kMaxParaphrases = 10;
inline constexpr int kMaxContextFacts = 4;

enum class Form { kCopular, kPossessive, kTransitive };
enum class TemplateKind { kBaseline, kParaphrase, kContextualized };

std::string_view FormName(Form form);
absl::StatusOr<Form> ParseForm(std::string_view name);
std::string_view TemplateKindName(TemplateKind kind);
absl::StatusOr<TemplateKind> ParseTemplateKind(std::string_view name);

struct CanaryTemplate {
  std::string pid;
  Form form = Form::kPossessive;
  TemplateKind kind = TemplateKind::kBaseline;
  int variant_id = 0;  // 0 = baseline, 1..10 = paraphrases
  std::string text;

  friend bool operator==(const CanaryTemplate&, const CanaryTemplate&) = default;
};

// Checks the placeholder invariants: PROTECTED_VALUE exactly once,
// HUMAN_SUBJECT exactly once (unless `allow_generic`, in which case zero is
// also fine), and baseline templates carry variant 0.
absl::Status ValidateTemplate(const CanaryTemplate& t,
                              bool allow_generic = false);

// Shallow part-of-speech rule over a closed lexicon: a leading finite verb
// makes the label Transitive, a leading preposition or a past participle
// followed by a preposition makes it Copular, anything else is a noun
// phrase and Possessive.
Form ClassifyForm(std::string_view property_label);

// Copular:    "HUMAN_SUBJECT is <label> PROTECTED_VALUE."
// Possessive: "HUMAN_SUBJECT's <label> is PROTECTED_VALUE."
// Transitive: "HUMAN_SUBJECT <label> PROTECTED_VALUE."
absl::StatusOr<CanaryTemplate> RenderBaseline(const PropertySpec& property,
                                              Form form);

struct ParaphraseError {
  int line = 0;
  std::string message;
};

struct ParaphraseSet {
  std::map<std::string, std::vector<CanaryTemplate>> by_pid;
  std::vector<ParaphraseError> errors;
};

// Paraphrase file: JSONL, one {"pid": "P106", "text": "..."} per line.
// Valid entries of each pid are numbered 1..10 in file order; entries that
// miss a placeholder, or exceed ten for their pid, are rejected with their
// line number.
ParaphraseSet ParseParaphrases(std::string_view jsonl);
absl::StatusOr<ParaphraseSet> LoadParaphrases(const std::string& path);

// Form implied by how the subject placeholder is used in free text.
Form InferForm(std::string_view text);

// Literal placeholder substitution.
std::string Instantiate(const CanaryTemplate& t, std::string_view subject_text,
                        std::string_view value_text);

// Substitutes the subject only; PROTECTED_VALUE stays in place.
CanaryTemplate InstantiateSubject(const CanaryTemplate& t,
                                  std::string_view subject_text);

struct AuxFact {
  std::string property_label;
  std::string value_label;
  std::string pid;  // optional; used to exclude the audited property

  friend bool operator==(const AuxFact&, const AuxFact&) = default;
};

enum class Cohort { kUnassigned, kWellKnown, kLesserKnown };
std::string_view CohortName(Cohort cohort);
absl::StatusOr<Cohort> ParseCohort(std::string_view name);

struct SubjectProfile {
  std::string name;
  std::string qid;
  std::vector<AuxFact> aux_facts;
  double web_presence = 0.0;
  Cohort cohort = Cohort::kUnassigned;
};

// Orders facts by how frequent their property is globally (descending),
// keeping the given order among equals. Unknown properties sort last.
std::vector<AuxFact> OrderFactsByFrequency(
    const std::vector<AuxFact>& facts,
    const std::map<std::string, int64_t>& distinct_humans_by_pid);

// Prepends up to `k` (at most four) auxiliary facts about the subject. The
// first fact names the subject possessively ("HUMAN_SUBJECT's <label> is
// <value>."), later ones use "Their ...", and the probed frame is rewritten
// to refer back with a pronoun. Facts for the audited property (matched by
// pid or label) are skipped. k == 0, or no usable fact, returns `t`.
CanaryTemplate Contextualize(const CanaryTemplate& t,
                             const SubjectProfile& subject, int k,
                             std::string_view audited_label = {});

// Replaces the subject with "This person" (possessive frames get
// "This person's"). Idempotent.
CanaryTemplate GenericSubject(const CanaryTemplate& t);

struct NameVariantSet {
  std::string original;
  std::vector<std::string> variants;
  bool degenerate = false;  // every candidate variant equalled the original
};

// Deterministic look-alike names, in order: first token reversed, last
// token reversed, first and last tokens swapped, every token reversed.
// Reversed tokens are re-capitalized. Variants equal to the original or to
// an earlier variant are dropped; the rest is truncated to `k`.
NameVariantSet SimilarNames(std::string_view name, size_t k = 4);

// templates/<pid>.jsonl lines: {"variant_id", "form", "kind", "text"}.
std::string TemplatesToJsonl(const std::vector<CanaryTemplate>& templates);
absl::StatusOr<std::vector<CanaryTemplate>> TemplatesFromJsonl(
    const std::string& pid, std::string_view jsonl);

}  // namespace memaudit

#endif  // MEMAUDIT_CANARY_H_
