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

#include "memaudit/canary.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>
#include <sstream>

#include "absl/strings/str_cat.h"
#include "json.hpp"
#include "memaudit/file_util.h"
#include "memaudit/text.h"

namespace memaudit {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Closed lexicons for the shallow classifier. They cover the leading words
// of the human-related property labels; anything unlisted falls through to
// the noun-phrase (Possessive) frame.
const std::set<std::string_view>& FiniteVerbs() {
  static const auto* verbs = new std::set<std::string_view>{
      "holds",     "has",        "plays",        "owns",      "speaks",
      "writes",    "wrote",      "works",        "lives",     "uses",
      "follows",   "practices",  "practises",    "supports",  "receives",
      "competes",  "participates", "represents", "commemorates", "signs",
      "sings",     "teaches",    "studies",      "wears",     "carries",
      "attends",   "founds",     "directs",      "produces",  "performs",
      "is",        "was",        "does",
  };
  return *verbs;
}

const std::set<std::string_view>& IrregularParticiples() {
  static const auto* words = new std::set<std::string_view>{
      "born",   "known",  "given",   "held",   "buried", "worn",
      "taken",  "drawn",  "chosen",  "written", "shown", "sworn",
      "driven", "bitten", "begun",   "done",   "made",   "paid",
      "sold",   "taught", "thought", "brought", "built", "caught",
      "found",  "led",    "left",    "lost",   "meant",  "met",
      "read",   "run",    "sent",    "spent",  "struck", "told",
      "won",    "slain",  "hung",    "kept",   "bred",
  };
  return *words;
}

const std::set<std::string_view>& Prepositions() {
  static const auto* words = new std::set<std::string_view>{
      "of",     "in",     "at",     "from",    "for",     "by",
      "with",   "on",     "under",  "after",   "before",  "during",
      "to",     "into",   "onto",   "through", "among",   "between",
      "within", "without", "about", "against", "towards", "toward",
      "via",    "per",    "as",     "like",    "near",    "over",
  };
  return *words;
}

// Words ending in -ed that are nouns or adjectives, not participles.
const std::set<std::string_view>& EdNouns() {
  static const auto* words = new std::set<std::string_view>{
      "bed", "red", "seed", "need", "creed", "speed", "breed", "reed",
      "feed", "shed", "sled", "med",
  };
  return *words;
}

std::string LowerAscii(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool AtSentenceStart(std::string_view text, size_t pos) {
  size_t i = pos;
  while (i > 0 && text[i - 1] == ' ') --i;
  if (i == 0) return true;
  char c = text[i - 1];
  return i < pos && (c == '.' || c == '!' || c == '?');
}

// "holds" -> "hold", "is" -> "are"; used when a third-person singular
// subject becomes "They".
std::string PluralVerb(std::string_view verb) {
  static const std::array<std::pair<std::string_view, std::string_view>, 4>
      kIrregular = {{{"is", "are"}, {"was", "were"}, {"has", "have"},
                     {"does", "do"}}};
  for (const auto& [singular, plural] : kIrregular) {
    if (verb == singular) return std::string(plural);
  }
  if (EndsWith(verb, "ies") && verb.size() > 3) {
    return absl::StrCat(std::string(verb.substr(0, verb.size() - 3)), "y");
  }
  for (std::string_view suffix :
       {"sses", "ches", "shes", "xes", "zes", "oes"}) {
    if (EndsWith(verb, suffix)) return std::string(verb.substr(0, verb.size() - 2));
  }
  if (EndsWith(verb, "s") && !EndsWith(verb, "ss") && verb.size() > 1) {
    return std::string(verb.substr(0, verb.size() - 1));
  }
  return std::string(verb);
}

bool LooksLikeVerb(std::string_view word) {
  std::string lower = LowerAscii(word);
  return FiniteVerbs().contains(lower);
}

std::string Capitalized(std::string_view word, bool capital) {
  std::string out(word);
  if (!out.empty()) {
    out[0] = static_cast<char>(capital ? std::toupper(static_cast<unsigned char>(out[0]))
                                       : std::tolower(static_cast<unsigned char>(out[0])));
  }
  return out;
}

// Rewrites the single HUMAN_SUBJECT occurrence in `text` as a pronoun.
std::string PronounFrame(std::string_view text) {
  size_t pos = text.find(kSubjectPlaceholder);
  if (pos == std::string_view::npos) return std::string(text);
  const bool start = AtSentenceStart(text, pos);
  std::string_view before = text.substr(0, pos);
  std::string_view after = text.substr(pos + kSubjectPlaceholder.size());

  if (StartsWith(after, "'s ") || after == "'s") {
    return absl::StrCat(std::string(before), Capitalized("their", start), std::string(after.substr(2)));
  }
  if (StartsWith(after, " ")) {
    std::string_view rest = after.substr(1);
    size_t end = rest.find_first_of(" .,;:!?");
    std::string_view next_word = rest.substr(0, end);
    if (start && !next_word.empty() && LooksLikeVerb(next_word)) {
      return absl::StrCat(std::string(before), Capitalized("they", start), " ",
                          PluralVerb(next_word),
                          std::string(end == std::string_view::npos ? "" : rest.substr(end)));
    }
  }
  return absl::StrCat(std::string(before), Capitalized(start ? "they" : "them", start),
                      std::string(after));
}

std::string FirstWord(std::string_view label) {
  std::vector<std::string> tokens = SplitWhitespace(label);
  if (tokens.empty()) return "";
  std::string word = LowerAscii(tokens.front());
  while (!word.empty() && std::ispunct(static_cast<unsigned char>(word.back())) &&
         word.back() != '-') {
    word.pop_back();
  }
  return word;
}

}  // namespace

std::string_view FormName(Form form) {
  switch (form) {
    case Form::kCopular:
      return "copular";
    case Form::kPossessive:
      return "possessive";
    case Form::kTransitive:
      return "transitive";
  }
  return "possessive";
}

absl::StatusOr<Form> ParseForm(std::string_view name) {
  std::string lower = LowerAscii(name);
  if (lower == "copular") return Form::kCopular;
  if (lower == "possessive") return Form::kPossessive;
  if (lower == "transitive") return Form::kTransitive;
  return absl::InvalidArgumentError(absl::StrCat("unknown form '", std::string(name), "'"));
}

std::string_view TemplateKindName(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::kBaseline:
      return "baseline";
    case TemplateKind::kParaphrase:
      return "paraphrase";
    case TemplateKind::kContextualized:
      return "contextualized";
  }
  return "baseline";
}

absl::StatusOr<TemplateKind> ParseTemplateKind(std::string_view name) {
  std::string lower = LowerAscii(name);
  if (lower == "baseline") return TemplateKind::kBaseline;
  if (lower == "paraphrase") return TemplateKind::kParaphrase;
  if (lower == "contextualized") return TemplateKind::kContextualized;
  return absl::InvalidArgumentError(absl::StrCat("unknown kind '", std::string(name), "'"));
}

absl::Status ValidateTemplate(const CanaryTemplate& t, bool allow_generic) {
  size_t values = CountOccurrences(t.text, kValuePlaceholder);
  size_t subjects = CountOccurrences(t.text, kSubjectPlaceholder);
  if (values != 1) {
    return absl::InvalidArgumentError(absl::StrCat(
        "template must contain ", std::string(kValuePlaceholder), " exactly once (found ",
        values, "): ", t.text));
  }
  if (subjects > 1 || (subjects == 0 && !allow_generic)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "template must contain ", std::string(kSubjectPlaceholder), " exactly once (found ",
        subjects, "): ", t.text));
  }
  if (t.kind == TemplateKind::kBaseline && t.variant_id != 0) {
    return absl::InvalidArgumentError("baseline template must be variant 0");
  }
  return absl::OkStatus();
}

Form ClassifyForm(std::string_view property_label) {
  std::vector<std::string> tokens = SplitWhitespace(property_label);
  if (tokens.empty()) return Form::kPossessive;
  const std::string first = FirstWord(tokens[0]);
  if (FiniteVerbs().contains(first)) return Form::kTransitive;
  if (Prepositions().contains(first)) return Form::kCopular;
  // A participle only heads a verb phrase when a preposition follows:
  // "employed by", "born in". "given name" and "unmarried partner" are
  // noun phrases.
  const bool participle =
      IrregularParticiples().contains(first) ||
      (first.size() > 3 && EndsWith(first, "ed") && !EdNouns().contains(first));
  if (participle && tokens.size() > 1 && Prepositions().contains(FirstWord(tokens[1]))) {
    return Form::kCopular;
  }
  return Form::kPossessive;
}

absl::StatusOr<CanaryTemplate> RenderBaseline(const PropertySpec& property,
                                              Form form) {
  std::string label = NormalizeWhitespace(property.label);
  if (label.empty()) {
    return absl::InvalidArgumentError(
        absl::StrCat(property.pid, " has an empty label"));
  }
  if (label.find(kSubjectPlaceholder) != std::string::npos ||
      label.find(kValuePlaceholder) != std::string::npos) {
    return absl::InvalidArgumentError(absl::StrCat(
        property.pid, " label already contains a placeholder: ", label));
  }
  CanaryTemplate t;
  t.pid = property.pid;
  t.form = form;
  t.kind = TemplateKind::kBaseline;
  t.variant_id = 0;
  switch (form) {
    case Form::kCopular:
      t.text = absl::StrCat(std::string(kSubjectPlaceholder), " is ", label, " ",
                            std::string(kValuePlaceholder), ".");
      break;
    case Form::kPossessive:
      t.text = absl::StrCat(std::string(kSubjectPlaceholder), "'s ", label, " is ",
                            std::string(kValuePlaceholder), ".");
      break;
    case Form::kTransitive:
      t.text = absl::StrCat(std::string(kSubjectPlaceholder), " ", label, " ",
                            std::string(kValuePlaceholder), ".");
      break;
  }
  return t;
}

Form InferForm(std::string_view text) {
  if (text.find(absl::StrCat(std::string(kSubjectPlaceholder), "'s")) != std::string_view::npos) {
    return Form::kPossessive;
  }
  size_t pos = text.find(kSubjectPlaceholder);
  if (pos != std::string_view::npos) {
    std::string_view after = text.substr(pos + kSubjectPlaceholder.size());
    if (StartsWith(after, " is ") || StartsWith(after, " was ")) {
      return Form::kCopular;
    }
  }
  return Form::kTransitive;
}

ParaphraseSet ParseParaphrases(std::string_view jsonl) {
  ParaphraseSet out;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (NormalizeWhitespace(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("pid") ||
        !j.contains("text") || !j["pid"].is_string() || !j["text"].is_string()) {
      out.errors.push_back({line_no, "expected {\"pid\": ..., \"text\": ...}"});
      continue;
    }
    std::string pid = j["pid"].get<std::string>();
    if (!IsPropertyId(pid)) {
      out.errors.push_back({line_no, absl::StrCat("bad pid '", pid, "'")});
      continue;
    }
    std::vector<CanaryTemplate>& list = out.by_pid[pid];
    CanaryTemplate t;
    t.pid = pid;
    t.kind = TemplateKind::kParaphrase;
    t.text = NormalizeWhitespace(j["text"].get<std::string>());
    t.form = InferForm(t.text);
    t.variant_id = static_cast<int>(list.size()) + 1;
    if (absl::Status s = ValidateTemplate(t); !s.ok()) {
      out.errors.push_back({line_no, std::string(s.message())});
      continue;
    }
    if (t.variant_id > kMaxParaphrases) {
      out.errors.push_back(
          {line_no, absl::StrCat("more than ", kMaxParaphrases,
                                 " paraphrases for ", pid)});
      continue;
    }
    list.push_back(std::move(t));
  }
  for (auto it = out.by_pid.begin(); it != out.by_pid.end();) {
    it = it->second.empty() ? out.by_pid.erase(it) : std::next(it);
  }
  return out;
}

absl::StatusOr<ParaphraseSet> LoadParaphrases(const std::string& path) {
  absl::StatusOr<std::string> text = ReadFile(path);
  if (!text.ok()) return text.status();
  return ParseParaphrases(*text);
}

std::string Instantiate(const CanaryTemplate& t, std::string_view subject_text,
                        std::string_view value_text) {
  // Substitute positions found in the template itself so that placeholder
  // look-alikes inside the inserted texts are never touched.
  std::string out;
  std::string_view text = t.text;
  size_t i = 0;
  while (i < text.size()) {
    if (text.compare(i, kSubjectPlaceholder.size(), kSubjectPlaceholder) == 0) {
      out.append(subject_text);
      i += kSubjectPlaceholder.size();
    } else if (text.compare(i, kValuePlaceholder.size(), kValuePlaceholder) == 0) {
      out.append(value_text);
      i += kValuePlaceholder.size();
    } else {
      out.push_back(text[i++]);
    }
  }
  return out;
}

CanaryTemplate InstantiateSubject(const CanaryTemplate& t,
                                  std::string_view subject_text) {
  CanaryTemplate out = t;
  out.text = ReplaceAll(t.text, std::string(kSubjectPlaceholder), subject_text);
  return out;
}

std::string_view CohortName(Cohort cohort) {
  switch (cohort) {
    case Cohort::kWellKnown:
      return "well-known";
    case Cohort::kLesserKnown:
      return "lesser-known";
    case Cohort::kUnassigned:
      return "unassigned";
  }
  return "unassigned";
}

absl::StatusOr<Cohort> ParseCohort(std::string_view name) {
  if (name == "well-known") return Cohort::kWellKnown;
  if (name == "lesser-known") return Cohort::kLesserKnown;
  if (name == "unassigned" || name.empty()) return Cohort::kUnassigned;
  return absl::InvalidArgumentError(absl::StrCat("unknown cohort '", std::string(name), "'"));
}

std::vector<AuxFact> OrderFactsByFrequency(
    const std::vector<AuxFact>& facts,
    const std::map<std::string, int64_t>& distinct_humans_by_pid) {
  std::vector<AuxFact> out = facts;
  auto frequency = [&](const AuxFact& f) -> int64_t {
    auto it = distinct_humans_by_pid.find(f.pid);
    return it == distinct_humans_by_pid.end() ? -1 : it->second;
  };
  std::stable_sort(out.begin(), out.end(),
                   [&](const AuxFact& a, const AuxFact& b) {
                     return frequency(a) > frequency(b);
                   });
  return out;
}

CanaryTemplate Contextualize(const CanaryTemplate& t,
                             const SubjectProfile& subject, int k,
                             std::string_view audited_label) {
  if (k <= 0) return t;
  k = std::min(k, kMaxContextFacts);
  const std::string audited = NormalizeLabel(audited_label);

  std::vector<const AuxFact*> chosen;
  for (const AuxFact& fact : subject.aux_facts) {
    if (static_cast<int>(chosen.size()) == k) break;
    if (!fact.pid.empty() && fact.pid == t.pid) continue;
    if (!audited.empty() && NormalizeLabel(fact.property_label) == audited) {
      continue;
    }
    if (NormalizeWhitespace(fact.property_label).empty() ||
        NormalizeWhitespace(fact.value_label).empty()) {
      continue;
    }
    chosen.push_back(&fact);
  }
  if (chosen.empty() || t.text.find(kSubjectPlaceholder) == std::string::npos) {
    return t;
  }

  std::string text;
  for (size_t i = 0; i < chosen.size(); ++i) {
    const std::string label = NormalizeWhitespace(chosen[i]->property_label);
    const std::string value = NormalizeWhitespace(chosen[i]->value_label);
    if (i == 0) {
      absl::StrAppend(&text, std::string(kSubjectPlaceholder), "'s ", label, " is ", value,
                      ".");
    } else {
      absl::StrAppend(&text, " Their ", label, " is ", value, ".");
    }
  }
  absl::StrAppend(&text, " ", PronounFrame(t.text));

  CanaryTemplate out = t;
  out.kind = TemplateKind::kContextualized;
  out.text = std::move(text);
  return out;
}

CanaryTemplate GenericSubject(const CanaryTemplate& t) {
  CanaryTemplate out = t;
  std::string text;
  std::string_view src = t.text;
  size_t start = 0;
  for (size_t pos = src.find(kSubjectPlaceholder); pos != std::string_view::npos;
       pos = src.find(kSubjectPlaceholder, start)) {
    text.append(src.substr(start, pos - start));
    text.append(AtSentenceStart(src, pos) ? "This person" : "this person");
    start = pos + kSubjectPlaceholder.size();
  }
  text.append(src.substr(start));
  out.text = std::move(text);
  return out;
}

NameVariantSet SimilarNames(std::string_view name, size_t k) {
  NameVariantSet out;
  std::vector<std::string> tokens = SplitWhitespace(name);
  out.original = JoinStrings(tokens, " ");
  if (tokens.empty()) {
    out.degenerate = true;
    return out;
  }
  auto reversed = [](const std::string& token) {
    return CapitalizeWord(ReverseUtf8(token));
  };

  std::vector<std::vector<std::string>> candidates;
  {
    std::vector<std::string> v = tokens;
    v.front() = reversed(tokens.front());
    candidates.push_back(std::move(v));
  }
  {
    std::vector<std::string> v = tokens;
    v.back() = reversed(tokens.back());
    candidates.push_back(std::move(v));
  }
  {
    std::vector<std::string> v = tokens;
    std::swap(v.front(), v.back());
    candidates.push_back(std::move(v));
  }
  {
    std::vector<std::string> v;
    for (const std::string& token : tokens) v.push_back(reversed(token));
    candidates.push_back(std::move(v));
  }

  std::set<std::string> seen{out.original};
  bool any_candidate = false;
  for (const auto& c : candidates) {
    std::string variant = JoinStrings(c, " ");
    if (!seen.insert(variant).second) continue;
    any_candidate = true;
    if (out.variants.size() < k) out.variants.push_back(std::move(variant));
  }
  out.degenerate = !any_candidate;
  return out;
}

std::string TemplatesToJsonl(const std::vector<CanaryTemplate>& templates) {
  std::string out;
  for (const CanaryTemplate& t : templates) {
    ordered_json j{{"variant_id", t.variant_id},
                   {"form", FormName(t.form)},
                   {"kind", TemplateKindName(t.kind)},
                   {"text", t.text}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

absl::StatusOr<std::vector<CanaryTemplate>> TemplatesFromJsonl(
    const std::string& pid, std::string_view jsonl) {
  std::vector<CanaryTemplate> out;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (NormalizeWhitespace(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    auto bad = [&](absl::string_view why) {
      return absl::InvalidArgumentError(
          absl::StrCat("templates for ", pid, " line ", line_no, ": ", why));
    };
    if (j.is_discarded() || !j.is_object() || !j.contains("variant_id") ||
        !j["variant_id"].is_number_integer() || !j.contains("text") ||
        !j["text"].is_string()) {
      return bad("expected {\"variant_id\", \"form\", \"kind\", \"text\"}");
    }
    CanaryTemplate t;
    t.pid = pid;
    t.variant_id = j["variant_id"].get<int>();
    t.text = j["text"].get<std::string>();
    absl::StatusOr<Form> form = ParseForm(j.value("form", "possessive"));
    absl::StatusOr<TemplateKind> kind =
        ParseTemplateKind(j.value("kind", t.variant_id == 0 ? "baseline" : "paraphrase"));
    if (!form.ok()) return bad(form.status().message());
    if (!kind.ok()) return bad(kind.status().message());
    t.form = *form;
    t.kind = *kind;
    if (absl::Status s = ValidateTemplate(t); !s.ok()) return bad(s.message());
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace memaudit
