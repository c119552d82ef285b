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

#include "memaudit/wikidata.h"

#include <fstream>
#include <utility>

#include "absl/strings/str_cat.h"
#include "boost/iostreams/device/file.hpp"
#include "boost/iostreams/filter/bzip2.hpp"
#include "boost/iostreams/filter/gzip.hpp"
#include "boost/iostreams/filtering_stream.hpp"
#include "json.hpp"
#include "memaudit/text.h"

namespace memaudit {
namespace {

using nlohmann::json;

bool IsPrefixedNumber(std::string_view id, char prefix) {
  if (id.size() < 2 || id[0] != prefix) return false;
  for (size_t i = 1; i < id.size(); ++i) {
    if (id[i] < '0' || id[i] > '9') return false;
  }
  return true;
}

std::string_view TrimLine(std::string_view line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n' ||
                           line.back() == ' ' || line.back() == '\t')) {
    line.remove_suffix(1);
  }
  while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) {
    line.remove_prefix(1);
  }
  if (!line.empty() && line.back() == ',') line.remove_suffix(1);
  return line;
}

const json* Find(const json& obj, const char* key) {
  if (!obj.is_object()) return nullptr;
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

std::optional<std::string> StringField(const json& obj, const char* key) {
  const json* v = Find(obj, key);
  if (v == nullptr || !v->is_string()) return std::nullopt;
  return v->get<std::string>();
}

// Returns std::nullopt when the statement does not have the documented
// mainsnak shape.
std::optional<ClaimValue> ParseStatement(const json& statement) {
  const json* snak = Find(statement, "mainsnak");
  if (snak == nullptr || !snak->is_object()) return std::nullopt;
  std::optional<std::string> snaktype = StringField(*snak, "snaktype");
  if (!snaktype) return std::nullopt;
  if (*snaktype != "value") return ClaimValue{ValueKind::kOther, *snaktype};

  const json* datavalue = Find(*snak, "datavalue");
  if (datavalue == nullptr) return std::nullopt;
  std::optional<std::string> type = StringField(*datavalue, "type");
  const json* value = Find(*datavalue, "value");
  if (!type || value == nullptr) return std::nullopt;

  if (*type == "wikibase-entityid") {
    if (std::optional<std::string> id = StringField(*value, "id")) {
      return ClaimValue{ValueKind::kEntity, *id};
    }
    const json* numeric = Find(*value, "numeric-id");
    std::optional<std::string> entity_type = StringField(*value, "entity-type");
    if (numeric == nullptr || !numeric->is_number_integer()) {
      return std::nullopt;
    }
    std::string prefix = entity_type == "property" ? "P" : "Q";
    return ClaimValue{ValueKind::kEntity,
                      absl::StrCat(prefix, numeric->get<int64_t>())};
  }
  if (*type == "string") {
    if (!value->is_string()) return std::nullopt;
    return ClaimValue{ValueKind::kString, value->get<std::string>()};
  }
  if (*type == "quantity") {
    std::optional<std::string> amount = StringField(*value, "amount");
    if (!amount) return std::nullopt;
    return ClaimValue{ValueKind::kQuantity, NormalizeQuantity(*amount)};
  }
  if (*type == "time") {
    std::optional<std::string> time = StringField(*value, "time");
    const json* precision = Find(*value, "precision");
    if (!time || precision == nullptr || !precision->is_number_integer()) {
      return std::nullopt;
    }
    return ClaimValue{ValueKind::kTime,
                      NormalizeTime(*time, precision->get<int>())};
  }
  return ClaimValue{ValueKind::kOther, *type};
}

std::string EnglishText(const json& entity, const char* field) {
  const json* lang_map = Find(entity, field);
  if (lang_map == nullptr) return "";
  const json* en = Find(*lang_map, "en");
  if (en == nullptr) return "";
  return StringField(*en, "value").value_or("");
}

}  // namespace

std::vector<std::string> DefaultDatatypeWhitelist() {
  return {std::string(kDatatypeWikibaseItem), std::string(kDatatypeString),
          std::string(kDatatypeQuantity), std::string(kDatatypeTime)};
}

bool IsEntityId(std::string_view id) { return IsPrefixedNumber(id, 'Q'); }
bool IsPropertyId(std::string_view id) { return IsPrefixedNumber(id, 'P'); }

std::optional<std::string> EntityRecord::EnglishLabel() const {
  auto it = labels.find("en");
  if (it == labels.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

std::string NormalizeTime(std::string_view wikidata_time, int precision) {
  std::string_view t = wikidata_time;
  bool negative = false;
  if (!t.empty() && (t.front() == '+' || t.front() == '-')) {
    negative = t.front() == '-';
    t.remove_prefix(1);
  }
  size_t t_pos = t.find('T');
  std::string_view date = t.substr(0, t_pos);
  // date is YYYY...-MM-DD; the year may have more than four digits.
  size_t day_dash = date.rfind('-');
  size_t month_dash =
      day_dash == std::string_view::npos ? day_dash : date.rfind('-', day_dash - 1);
  std::string_view year = date;
  if (month_dash != std::string_view::npos) year = date.substr(0, month_dash);

  size_t keep;
  if (precision >= 11 || month_dash == std::string_view::npos) {
    keep = date.size();
  } else if (precision == 10) {
    keep = day_dash;
  } else {
    keep = year.size();
  }
  return absl::StrCat(negative ? "-" : "", std::string(date.substr(0, keep)));
}

std::string NormalizeQuantity(std::string_view amount) {
  if (!amount.empty() && amount.front() == '+') amount.remove_prefix(1);
  return std::string(amount);
}

absl::StatusOr<Compression> ParseCompression(std::string_view hint) {
  if (hint.empty() || hint == "auto") return Compression::kAuto;
  if (hint == "none" || hint == "plain" || hint == "jsonl") {
    return Compression::kNone;
  }
  if (hint == "gzip" || hint == "gz") return Compression::kGzip;
  if (hint == "bzip2" || hint == "bz2") return Compression::kBzip2;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown compression hint '", std::string(hint), "'"));
}

absl::StatusOr<DumpLine> ParseDumpLine(std::string_view raw_line) {
  std::string_view line = TrimLine(raw_line);
  json entity = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (entity.is_discarded() || !entity.is_object()) {
    return absl::InvalidArgumentError("line is not a JSON object");
  }
  std::optional<std::string> id = StringField(entity, "id");
  if (!id) return absl::InvalidArgumentError("entity has no id");

  DumpLine out;
  std::string type = StringField(entity, "type").value_or("");
  if (type == "property" || (type.empty() && IsPropertyId(*id))) {
    if (!IsPropertyId(*id)) {
      return absl::InvalidArgumentError(absl::StrCat("bad property id ", *id));
    }
    out.kind = DumpLine::Kind::kProperty;
    out.property.pid = *id;
    out.property.label = EnglishText(entity, "labels");
    out.property.description = EnglishText(entity, "descriptions");
    out.property.datatype = StringField(entity, "datatype").value_or("");
    if (const json* aliases = Find(entity, "aliases")) {
      if (const json* en = Find(*aliases, "en"); en && en->is_array()) {
        for (const json& alias : *en) {
          if (auto v = StringField(alias, "value")) {
            out.property.aliases.push_back(*v);
          }
        }
      }
    }
    return out;
  }
  if (!type.empty() && type != "item") {
    return out;  // lexemes, forms, senses
  }
  if (!IsEntityId(*id)) {
    return absl::InvalidArgumentError(absl::StrCat("bad entity id ", *id));
  }

  out.kind = DumpLine::Kind::kItem;
  out.item.qid = *id;
  if (const json* labels = Find(entity, "labels"); labels && labels->is_object()) {
    for (const auto& [lang, label] : labels->items()) {
      if (auto v = StringField(label, "value")) out.item.labels[lang] = *v;
    }
  }
  if (const json* claims = Find(entity, "claims"); claims && claims->is_object()) {
    for (const auto& [pid, statements] : claims->items()) {
      if (!IsPropertyId(pid) || !statements.is_array()) {
        ++out.malformed_claims;
        continue;
      }
      std::vector<ClaimValue> values;
      for (const json& statement : statements) {
        std::optional<ClaimValue> value = ParseStatement(statement);
        if (!value) {
          ++out.malformed_claims;
          continue;
        }
        values.push_back(std::move(*value));
      }
      if (!values.empty()) out.item.claims.emplace(pid, std::move(values));
    }
  }
  return out;
}

struct EntityStream::Source {
  boost::iostreams::filtering_istream stream;
};

EntityStream::EntityStream(std::unique_ptr<std::istream> input)
    : input_(std::move(input)) {}

EntityStream::~EntityStream() {
  // The filtering stream must be torn down before its device.
  input_.reset();
  source_.reset();
}

absl::StatusOr<std::unique_ptr<EntityStream>> EntityStream::Open(
    const std::string& path, Compression compression) {
  {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) {
      return absl::NotFoundError(absl::StrCat("cannot open dump ", path));
    }
  }
  if (compression == Compression::kAuto) {
    if (EndsWith(path, ".gz")) {
      compression = Compression::kGzip;
    } else if (EndsWith(path, ".bz2")) {
      compression = Compression::kBzip2;
    } else {
      compression = Compression::kNone;
    }
  }
  auto source = std::make_unique<Source>();
  if (compression == Compression::kGzip) {
    source->stream.push(boost::iostreams::gzip_decompressor());
  } else if (compression == Compression::kBzip2) {
    source->stream.push(boost::iostreams::bzip2_decompressor());
  }
  source->stream.push(
      boost::iostreams::file_source(path, std::ios::in | std::ios::binary));
  auto stream = std::unique_ptr<EntityStream>(new EntityStream(nullptr));
  stream->source_ = std::move(source);
  return stream;
}

absl::Status EntityStream::CheckCorruption(bool at_end) const {
  int64_t threshold =
      at_end ? kMinLinesForCorruptionCheck : kStreamingCorruptionWindow;
  if (lines_read_ < threshold) return absl::OkStatus();
  if (static_cast<double>(malformed_lines_) >
      kMaxMalformedFraction * static_cast<double>(lines_read_)) {
    return absl::DataLossError(
        absl::StrCat("dump looks corrupt: ", malformed_lines_, " of ",
                     lines_read_, " lines malformed"));
  }
  return absl::OkStatus();
}

absl::StatusOr<std::optional<EntityRecord>> EntityStream::Next() {
  if (finished_) return std::optional<EntityRecord>();
  std::istream& in = source_ ? static_cast<std::istream&>(source_->stream)
                             : *input_;
  std::string line;
  while (true) {
    bool got_line = false;
    try {
      got_line = static_cast<bool>(std::getline(in, line));
    } catch (const std::exception& e) {
      finished_ = true;
      return absl::DataLossError(
          absl::StrCat("failed to read dump stream: ", e.what()));
    }
    if (!got_line) {
      finished_ = true;
      if (in.bad()) return absl::DataLossError("I/O error reading dump");
      if (absl::Status s = CheckCorruption(/*at_end=*/true); !s.ok()) return s;
      return std::optional<EntityRecord>();
    }
    std::string_view trimmed = TrimLine(line);
    if (trimmed.empty() || trimmed == "[" || trimmed == "]") continue;

    ++lines_read_;
    absl::StatusOr<DumpLine> parsed = ParseDumpLine(trimmed);
    if (!parsed.ok()) {
      ++malformed_lines_;
      if (absl::Status s = CheckCorruption(/*at_end=*/false); !s.ok()) {
        finished_ = true;
        return s;
      }
      continue;
    }
    malformed_claims_ += parsed->malformed_claims;
    switch (parsed->kind) {
      case DumpLine::Kind::kItem:
        return std::optional<EntityRecord>(std::move(parsed->item));
      case DumpLine::Kind::kProperty:
        properties_.push_back(std::move(parsed->property));
        break;
      case DumpLine::Kind::kIgnored:
        break;
    }
  }
}

}  // namespace memaudit
