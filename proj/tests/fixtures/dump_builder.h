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

// Builders for Wikidata-shaped dump lines and a seeded synthetic dump whose
// ground truth is kept in memory for recounting.

#ifndef MEMAUDIT_TESTS_FIXTURES_DUMP_BUILDER_H_
#define MEMAUDIT_TESTS_FIXTURES_DUMP_BUILDER_H_

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

namespace memaudit::testing {

using nlohmann::json;

inline json EntitySnak(const std::string& pid, const std::string& qid) {
  return {{"snaktype", "value"},
          {"property", pid},
          {"datatype", "wikibase-item"},
          {"datavalue",
           {{"value",
             {{"entity-type", "item"},
              {"numeric-id", std::stoll(qid.substr(1))},
              {"id", qid}}},
            {"type", "wikibase-entityid"}}}};
}

inline json StringSnak(const std::string& pid, const std::string& value) {
  return {{"snaktype", "value"},
          {"property", pid},
          {"datatype", "string"},
          {"datavalue", {{"value", value}, {"type", "string"}}}};
}

inline json Statement(json snak, const std::string& rank = "normal") {
  return {{"mainsnak", std::move(snak)}, {"type", "statement"}, {"rank", rank}};
}

struct FakeEntity {
  std::string qid;
  std::optional<std::string> en_label;
  // pid -> entity values
  std::map<std::string, std::vector<std::string>> entity_claims;
  // pid -> string values (wrong type under an item property, or a string
  // property)
  std::map<std::string, std::vector<std::string>> string_claims;
};

inline std::string ItemLine(const FakeEntity& e) {
  json labels = json::object();
  if (e.en_label) labels["en"] = {{"language", "en"}, {"value", *e.en_label}};
  labels["de"] = {{"language", "de"}, {"value", "de-" + e.qid}};
  json claims = json::object();
  for (const auto& [pid, values] : e.entity_claims) {
    for (const std::string& v : values) claims[pid].push_back(Statement(EntitySnak(pid, v)));
  }
  for (const auto& [pid, values] : e.string_claims) {
    for (const std::string& v : values) claims[pid].push_back(Statement(StringSnak(pid, v)));
  }
  json j{{"type", "item"}, {"id", e.qid}, {"labels", labels}, {"claims", claims}};
  return j.dump();
}

inline std::string PropertyLine(const std::string& pid, const std::string& label,
                                const std::string& datatype,
                                const std::string& description = "",
                                const std::vector<std::string>& aliases = {}) {
  json j{{"type", "property"},
         {"id", pid},
         {"datatype", datatype},
         {"labels", {{"en", {{"language", "en"}, {"value", label}}}}},
         {"descriptions", json::object()},
         {"aliases", json::object()},
         {"claims", json::object()}};
  if (!description.empty()) {
    j["descriptions"]["en"] = {{"language", "en"}, {"value", description}};
  }
  for (const std::string& a : aliases) {
    j["aliases"]["en"].push_back({{"language", "en"}, {"value", a}});
  }
  return j.dump();
}

// Canonical dump layout: "[", one entity per line with trailing commas, "]".
inline void WriteDump(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  out << "[\n";
  for (size_t i = 0; i < lines.size(); ++i) {
    out << lines[i] << (i + 1 < lines.size() ? ",\n" : "\n");
  }
  out << "]\n";
}

struct SyntheticProperty {
  std::string pid;
  std::string label;
  std::string datatype;
};

// A deterministic dump of `entities` items (about 70% humans) over a fixed
// set of properties with skewed usage, plus the property entities up front.
struct SyntheticDump {
  std::vector<SyntheticProperty> properties;
  std::vector<FakeEntity> entities;

  static SyntheticDump Make(size_t entities, uint64_t seed) {
    SyntheticDump d;
    d.properties = {
        {"P106", "occupation", "wikibase-item"},
        {"P27", "country of citizenship", "wikibase-item"},
        {"P19", "place of birth", "wikibase-item"},
        {"P1412", "languages spoken, written or signed", "wikibase-item"},
        {"P21", "sex or gender", "wikibase-item"},
        {"P1477", "birth name", "string"},
        {"P18", "image", "commons-media"},
        {"P9001", "rare link", "wikibase-item"},
        {"P9002", "rarer link", "wikibase-item"},
        {"P9003", "nickname", "string"},
    };
    // Probability that a human carries each property; P9001/P9002 land
    // near the 100-human threshold for 10k entities.
    const double usage[] = {0.9, 0.8, 0.6, 0.3, 0.95, 0.2, 0.4, 0.0145, 0.0138, 0.05};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    std::uniform_int_distribution<int> value(1, 400);
    std::uniform_int_distribution<int> repeats(1, 3);
    for (size_t i = 0; i < entities; ++i) {
      FakeEntity e;
      e.qid = "Q" + std::to_string(1000 + i);
      const bool human = u(rng) < 0.7;
      if (u(rng) < 0.95) e.en_label = "Person " + std::to_string(i % (entities / 2 + 1));
      e.entity_claims["P31"] = {human ? "Q5" : "Q" + std::to_string(100 + value(rng))};
      for (size_t p = 0; p < d.properties.size(); ++p) {
        if (u(rng) >= usage[p]) continue;
        const auto& prop = d.properties[p];
        const int n = repeats(rng);
        for (int k = 0; k < n; ++k) {
          if (prop.datatype == "wikibase-item") {
            // Occasionally a string where an entity belongs.
            if (u(rng) < 0.01) {
              e.string_claims[prop.pid].push_back("oops");
            } else {
              e.entity_claims[prop.pid].push_back("Q" + std::to_string(value(rng)));
            }
          } else {
            e.string_claims[prop.pid].push_back("s" + std::to_string(value(rng)));
          }
        }
      }
      d.entities.push_back(std::move(e));
    }
    return d;
  }

  std::vector<std::string> Lines() const {
    std::vector<std::string> lines;
    for (const auto& p : properties) lines.push_back(PropertyLine(p.pid, p.label, p.datatype));
    for (const auto& e : entities) lines.push_back(ItemLine(e));
    return lines;
  }
};

}  // namespace memaudit::testing

#endif  // MEMAUDIT_TESTS_FIXTURES_DUMP_BUILDER_H_
