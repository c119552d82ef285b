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

// audit: command-line front end.
//
//   audit ingest         dump -> properties.json, usage.json, pairs/
//   audit sample-cfs     pairs/ -> counterfactuals.json
//   audit build-canaries properties.json + paraphrases -> templates/
//   audit run            subjects + templates + counterfactuals -> records
//   audit report         records -> summary table, csv or json

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "json.hpp"
#include "memaudit/audit.h"
#include "memaudit/canary.h"
#include "memaudit/file_util.h"
#include "memaudit/http.h"
#include "memaudit/ingest.h"
#include "memaudit/label_service.h"
#include "memaudit/likelihood.h"
#include "memaudit/metric.h"
#include "memaudit/report.h"
#include "memaudit/status_macros.h"

namespace memaudit {
namespace {

namespace fs = std::filesystem;

std::vector<std::string> SplitList(const std::string& csv) {
  std::vector<std::string> out;
  for (absl::string_view piece : absl::StrSplit(csv, ',', absl::SkipWhitespace())) {
    out.emplace_back(piece);
  }
  return out;
}

// Regular files in `dir` with `extension`, sorted by name.
std::vector<fs::path> ListFiles(const std::string& dir, const std::string& extension) {
  std::vector<fs::path> out;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == extension) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void PrintWarnings(const std::vector<std::string>& warnings) {
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
}

// ---- ingest

struct IngestArgs {
  std::vector<std::string> dumps;
  std::string out;
  int64_t min_humans = 100;
  std::string datatypes = "wikibase-item,string,quantity,time";
  std::string compression = "auto";
  std::string catalog;
  int shards_in_flight = 4;
};

absl::Status Ingest(const IngestArgs& args) {
  IngestOptions options;
  options.dump_paths = args.dumps;
  options.min_humans = args.min_humans;
  options.datatypes = SplitList(args.datatypes);
  options.max_parallel_shards = args.shards_in_flight;
  MEMAUDIT_ASSIGN_OR_RETURN(options.compression, ParseCompression(args.compression));
  if (!args.catalog.empty()) {
    MEMAUDIT_ASSIGN_OR_RETURN(std::string text, ReadFile(args.catalog));
    MEMAUDIT_ASSIGN_OR_RETURN(options.catalog, PropertiesFromJson(text));
  }
  MEMAUDIT_ASSIGN_OR_RETURN(IngestResult result, RunIngest(options));
  MEMAUDIT_RETURN_IF_ERROR(WriteIngestOutputs(result, args.out));
  std::cerr << "read " << result.stats.lines_read << " lines, "
            << result.stats.humans << " humans, "
            << result.stats.malformed_lines << " malformed lines, "
            << result.stats.malformed_claims << " malformed claims; kept "
            << result.properties.size() << " properties\n";
  return absl::OkStatus();
}

// ---- sample-cfs

struct SampleArgs {
  std::string pairs;
  std::string out = "counterfactuals.json";
  size_t n = 100;
  uint64_t seed = 0;
  std::string endpoint = "https://www.wikidata.org/w/api.php";
  std::string cache;
  bool offline = false;
  int concurrency = 4;
};

absl::Status SampleCfs(const SampleArgs& args) {
  LabelCache cache;
  if (!args.cache.empty()) {
    MEMAUDIT_ASSIGN_OR_RETURN(cache, LabelCache::Load(args.cache));
  }
  std::unique_ptr<HttpClient> client;
  if (!args.offline) client = MakeHttpClient();
  LabelResolverOptions options;
  options.endpoint = args.endpoint;
  options.offline = args.offline;
  options.max_concurrent = args.concurrency;
  LabelResolver resolver(options, client.get(), &cache);
  LabelLookup lookup = [&](const std::vector<std::string>& qids) {
    return resolver.Resolve(qids);
  };

  std::vector<fs::path> files = ListFiles(args.pairs, ".jsonl");
  if (files.empty()) {
    return absl::NotFoundError(absl::StrCat("no <pid>.jsonl files under ", args.pairs));
  }
  std::vector<CounterfactualSet> sets;
  absl::Status failure;
  for (const fs::path& file : files) {
    const std::string pid = file.stem().string();
    MEMAUDIT_ASSIGN_OR_RETURN(std::string text, ReadFile(file.string()));
    MEMAUDIT_ASSIGN_OR_RETURN(PairSample pairs, PairsFromJsonl(pid, text));
    absl::StatusOr<CounterfactualSet> set =
        SampleCounterfactuals(pairs, args.n, args.seed, lookup);
    if (!set.ok()) {
      failure = set.status();
      break;
    }
    if (set->undersized) {
      std::cerr << "warning: " << pid << " has only " << set->value_cfs.size()
                << " usable pairs\n";
    }
    sets.push_back(std::move(*set));
  }
  // Whatever was fetched is worth keeping, even when a later pid failed.
  if (!args.cache.empty()) MEMAUDIT_RETURN_IF_ERROR(cache.Save());
  MEMAUDIT_RETURN_IF_ERROR(failure);
  MEMAUDIT_RETURN_IF_ERROR(WriteFile(args.out, CounterfactualsToJson(sets)));
  std::cerr << resolver.http_calls() << " label requests\n";
  return absl::OkStatus();
}

// ---- build-canaries

struct CanaryArgs {
  std::string properties;
  std::string paraphrases;
  std::string out;
};

absl::Status BuildCanaries(const CanaryArgs& args) {
  MEMAUDIT_ASSIGN_OR_RETURN(std::string text, ReadFile(args.properties));
  MEMAUDIT_ASSIGN_OR_RETURN(std::vector<PropertySpec> properties,
                            PropertiesFromJson(text));
  ParaphraseSet paraphrases;
  if (!args.paraphrases.empty()) {
    std::vector<fs::path> files;
    if (fs::is_directory(args.paraphrases)) {
      files = ListFiles(args.paraphrases, ".jsonl");
    } else {
      files.emplace_back(args.paraphrases);
    }
    std::string all;
    for (const fs::path& f : files) {
      MEMAUDIT_ASSIGN_OR_RETURN(std::string body, ReadFile(f.string()));
      all += body;
      if (!all.empty() && all.back() != '\n') all += '\n';
    }
    paraphrases = ParseParaphrases(all);
    for (const ParaphraseError& e : paraphrases.errors) {
      std::cerr << "warning: paraphrase line " << e.line << ": " << e.message << "\n";
    }
  }
  for (const PropertySpec& p : properties) {
    const Form form = ClassifyForm(p.label);
    absl::StatusOr<CanaryTemplate> base = RenderBaseline(p, form);
    if (!base.ok()) {
      std::cerr << "warning: " << p.pid << ": " << base.status().message() << "\n";
      continue;
    }
    std::vector<CanaryTemplate> templates = {*base};
    if (auto it = paraphrases.by_pid.find(p.pid); it != paraphrases.by_pid.end()) {
      templates.insert(templates.end(), it->second.begin(), it->second.end());
    }
    MEMAUDIT_RETURN_IF_ERROR(
        WriteFile((fs::path(args.out) / (p.pid + ".jsonl")).string(),
                  TemplatesToJsonl(templates)));
  }
  return absl::OkStatus();
}

// ---- run

struct RunArgs {
  std::string subjects;
  std::string properties = "P106,P1412,P19,P21,P27";
  std::string templates;
  std::string cfs;
  std::string provider;
  std::string model;
  double alpha = 1.0;
  size_t name_variants = 4;
  int contextualize = 0;
  size_t counterfactuals = kDefaultCounterfactuals;
  std::string catalog;
  std::string usage;
  std::string similarity;
  double threshold = EquivalenceProvider::kDefaultThreshold;
  std::string cache;
  int concurrency = 4;
  bool dump_scores = false;
  std::string out = "records.jsonl";
};

absl::Status Run(const RunArgs& args) {
  AuditRunInputs inputs;
  inputs.pids = SplitList(args.properties);
  inputs.max_counterfactuals = args.counterfactuals;

  MEMAUDIT_ASSIGN_OR_RETURN(std::string subjects_text, ReadFile(args.subjects));
  MEMAUDIT_ASSIGN_OR_RETURN(inputs.subjects, SubjectsFromJson(subjects_text));

  bool any_unassigned = false;
  for (const SubjectEntry& s : inputs.subjects) {
    any_unassigned |= s.profile.cohort == Cohort::kUnassigned;
  }
  if (any_unassigned) {
    CohortSplitResult split = CohortSplit(inputs.subjects);
    PrintWarnings(split.warnings);
    for (const CohortAssignment& a : split.assignments) {
      SubjectProfile& p = inputs.subjects[a.subject_index].profile;
      if (p.cohort == Cohort::kUnassigned) p.cohort = a.cohort;
      if (a.composite) p.web_presence = *a.composite;
    }
  }

  if (!args.usage.empty()) {
    MEMAUDIT_ASSIGN_OR_RETURN(std::string text, ReadFile(args.usage));
    nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.contains("distinct_humans")) {
      return absl::InvalidArgumentError(absl::StrCat(args.usage, ": not a usage file"));
    }
    std::map<std::string, int64_t> frequency;
    for (const auto& [pid, count] : doc["distinct_humans"].items()) {
      frequency[pid] = count.get<int64_t>();
    }
    for (SubjectEntry& s : inputs.subjects) {
      s.profile.aux_facts = OrderFactsByFrequency(s.profile.aux_facts, frequency);
    }
  }

  if (!args.catalog.empty()) {
    MEMAUDIT_ASSIGN_OR_RETURN(std::string text, ReadFile(args.catalog));
    MEMAUDIT_ASSIGN_OR_RETURN(std::vector<PropertySpec> catalog,
                              PropertiesFromJson(text));
    for (const PropertySpec& p : catalog) inputs.property_labels[p.pid] = p.label;
  }

  for (const std::string& pid : inputs.pids) {
    const std::string path = (fs::path(args.templates) / (pid + ".jsonl")).string();
    if (!fs::exists(path)) continue;
    MEMAUDIT_ASSIGN_OR_RETURN(std::string text, ReadFile(path));
    MEMAUDIT_ASSIGN_OR_RETURN(inputs.templates[pid], TemplatesFromJsonl(pid, text));
  }

  MEMAUDIT_ASSIGN_OR_RETURN(std::string cfs_text, ReadFile(args.cfs));
  MEMAUDIT_ASSIGN_OR_RETURN(auto cfs, CounterfactualsFromJson(cfs_text));
  for (auto& [pid, set] : cfs) inputs.counterfactuals[pid] = set.value_cfs;

  AuditOptions options;
  options.alpha = args.alpha;
  options.name_variants = args.name_variants;
  options.contextualize = args.contextualize;
  if (!args.similarity.empty()) {
    MEMAUDIT_ASSIGN_OR_RETURN(std::string text, ReadFile(args.similarity));
    MEMAUDIT_ASSIGN_OR_RETURN(options.equivalence,
                              EquivalenceProvider::FromJson(text, args.threshold));
  } else {
    options.equivalence = EquivalenceProvider::Exact(args.threshold);
  }

  MEMAUDIT_ASSIGN_OR_RETURN(ProviderConfig config, ParseProviderSpec(args.provider));
  if (!args.model.empty()) config.model_id = args.model;
  if (!args.cache.empty()) config.cache_path = args.cache;
  config.max_concurrent = args.concurrency;
  MEMAUDIT_ASSIGN_OR_RETURN(std::unique_ptr<LikelihoodGateway> gateway,
                            LikelihoodGateway::Create(config));

  MEMAUDIT_ASSIGN_OR_RETURN(AuditRunResult result,
                            RunAudit(inputs, *gateway, options));
  PrintWarnings(result.warnings);
  MEMAUDIT_RETURN_IF_ERROR(
      WriteFile(args.out, RecordsToJsonl(result.records, args.dump_scores)));
  std::cerr << result.records.size() << " records, " << gateway->upstream_calls()
            << " provider calls\n";
  return absl::OkStatus();
}

// ---- report

struct ReportArgs {
  std::string records;
  std::string mode = "strict";
  std::string format = "table";
  std::string out;
};

absl::Status Report(const ReportArgs& args) {
  MEMAUDIT_ASSIGN_OR_RETURN(AggregationMode mode, ParseAggregationMode(args.mode));
  MEMAUDIT_ASSIGN_OR_RETURN(std::string text, ReadFile(args.records));
  MEMAUDIT_ASSIGN_OR_RETURN(std::vector<AuditRecord> records, RecordsFromJsonl(text));
  AggregateResult agg = Aggregate(records, mode);
  PrintWarnings(agg.warnings);

  std::string body;
  std::string name;
  if (args.format == "table") {
    body = FormatTable(agg.summaries);
    name = "summary.txt";
  } else if (args.format == "csv") {
    body = SummariesToCsv(agg.summaries);
    name = "summary.csv";
  } else if (args.format == "json") {
    body = SummariesToJson(agg.summaries);
    name = "summary.json";
  } else {
    return absl::InvalidArgumentError(
        absl::StrCat("format must be table, csv or json, got '", args.format, "'"));
  }
  std::cout << body;
  if (!args.out.empty()) {
    MEMAUDIT_RETURN_IF_ERROR(WriteFile((fs::path(args.out) / name).string(), body));
    MEMAUDIT_RETURN_IF_ERROR(
        WriteFile((fs::path(args.out) / "property_breakdown.csv").string(),
                  PropertyBreakdownToCsv(PropertyBreakdown(records))));
  }
  return absl::OkStatus();
}

int Finish(const absl::Status& status) {
  if (status.ok()) return 0;
  std::cerr << "error: " << status << "\n";
  return 1;
}

}  // namespace
}  // namespace memaudit

int main(int argc, char** argv) {
  using namespace memaudit;
  CLI::App app{"Audit language models for memorized facts about people"};
  app.require_subcommand(1);

  IngestArgs ingest;
  CLI::App* ingest_cmd = app.add_subcommand("ingest", "Stream a Wikidata dump");
  ingest_cmd->add_option("--dump", ingest.dumps, "Dump file(s); several are shards")
      ->required();
  ingest_cmd->add_option("--out", ingest.out, "Output directory")->required();
  ingest_cmd->add_option("--min-humans", ingest.min_humans, "Usage threshold");
  ingest_cmd->add_option("--datatypes", ingest.datatypes, "Comma-separated whitelist");
  ingest_cmd->add_option("--compression", ingest.compression, "auto|none|gzip|bzip2");
  ingest_cmd->add_option("--catalog", ingest.catalog, "Extra properties.json");
  ingest_cmd->add_option("--shards-in-flight", ingest.shards_in_flight)
      ->check(CLI::PositiveNumber);

  SampleArgs sample;
  CLI::App* sample_cmd =
      app.add_subcommand("sample-cfs", "Draw counterfactual candidates");
  sample_cmd->add_option("--pairs", sample.pairs, "pairs/ directory")->required();
  sample_cmd->add_option("--out", sample.out, "Output counterfactuals.json");
  sample_cmd->add_option("--n", sample.n, "Pairs per property");
  sample_cmd->add_option("--seed", sample.seed)->required();
  sample_cmd->add_option("--endpoint", sample.endpoint, "wbgetentities endpoint");
  sample_cmd->add_option("--cache", sample.cache, "Label cache file");
  sample_cmd->add_flag("--offline", sample.offline, "Use the cache only");
  sample_cmd->add_option("--concurrency", sample.concurrency)
      ->check(CLI::PositiveNumber);

  CanaryArgs canary;
  CLI::App* canary_cmd =
      app.add_subcommand("build-canaries", "Render canary templates");
  canary_cmd->add_option("--properties", canary.properties, "properties.json")
      ->required();
  canary_cmd->add_option("--paraphrases", canary.paraphrases,
                         "Paraphrase JSONL file or directory");
  canary_cmd->add_option("--out", canary.out, "templates/ directory")->required();

  RunArgs run;
  CLI::App* run_cmd = app.add_subcommand("run", "Score canaries against a model");
  run_cmd->add_option("--subjects", run.subjects, "subjects.json")->required();
  run_cmd->add_option("--properties", run.properties, "Comma-separated pids");
  run_cmd->add_option("--templates", run.templates, "templates/ directory")
      ->required();
  run_cmd->add_option("--cfs", run.cfs, "counterfactuals.json")->required();
  run_cmd->add_option("--provider", run.provider, "http:<url> or mock:<path>")
      ->required();
  run_cmd->add_option("--model", run.model, "Model id sent to the provider");
  run_cmd->add_option("--alpha", run.alpha, "Similar-name adjustment weight");
  run_cmd->add_option("--name-variants", run.name_variants);
  run_cmd->add_option("--contextualize", run.contextualize, "Auxiliary facts (0-4)")
      ->check(CLI::Range(0, kMaxContextFacts));
  run_cmd->add_option("--counterfactuals", run.counterfactuals, "Per property");
  run_cmd->add_option("--catalog", run.catalog, "properties.json for labels");
  run_cmd->add_option("--usage", run.usage, "usage.json to order auxiliary facts");
  run_cmd->add_option("--similarity", run.similarity,
                      "JSON array of [label, label, similarity]");
  run_cmd->add_option("--threshold", run.threshold, "Equivalence threshold");
  run_cmd->add_option("--cache", run.cache, "Persistent NLL cache (JSONL)");
  run_cmd->add_option("--concurrency", run.concurrency)->check(CLI::PositiveNumber);
  run_cmd->add_flag("--dump-scores", run.dump_scores, "Keep per-candidate scores");
  run_cmd->add_option("--out", run.out, "Output records.jsonl");

  ReportArgs report;
  CLI::App* report_cmd = app.add_subcommand("report", "Summarize audit records");
  report_cmd->add_option("--records", report.records, "records.jsonl")->required();
  report_cmd->add_option("--mode", report.mode, "strict|lenient");
  report_cmd->add_option("--format", report.format, "table|csv|json");
  report_cmd->add_option("--out", report.out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  if (*ingest_cmd) return Finish(Ingest(ingest));
  if (*sample_cmd) return Finish(SampleCfs(sample));
  if (*canary_cmd) return Finish(BuildCanaries(canary));
  if (*run_cmd) return Finish(Run(run));
  if (*report_cmd) return Finish(Report(report));
  return 1;
}
