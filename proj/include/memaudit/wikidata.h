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

#ifndef MEMAUDIT_WIKIDATA_H_
#define MEMAUDIT_WIKIDATA_H_

#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace memaudit {

// Datatypes that can be rendered as English text in a canary.
inline constexpr std::string_view kDatatypeWikibaseItem = "wikibase-item";
inline constexpr std::string_view kDatatypeString = "string";
inline constexpr std::string_view kDatatypeQuantity = "quantity";
inline constexpr std::string_view kDatatypeTime = "time";

std::vector<std::string> DefaultDatatypeWhitelist();

bool IsEntityId(std::string_view id);    // Q followed by digits
bool IsPropertyId(std::string_view id);  // P followed by digits

enum class ValueKind { kEntity, kString, kQuantity, kTime, kOther };

// One claim value. `text` holds the entity id, the raw string, the
// quantity amount as a decimal string, or the date truncated to the stated
// precision. kOther covers somevalue/novalue snaks and datavalue types we
// do not render (monolingual text, coordinates, ...).
struct ClaimValue {
  ValueKind kind = ValueKind::kOther;
  std::string text;

  friend bool operator==(const ClaimValue&, const ClaimValue&) = default;
};

struct EntityRecord {
  std::string qid;
  std::map<std::string, std::string> labels;  // language -> label
  std::map<std::string, std::vector<ClaimValue>> claims;

  std::optional<std::string> EnglishLabel() const;
};

struct PropertySpec {
  std::string pid;
  std::string label;
  std::string description;
  std::vector<std::string> aliases;
  std::string datatype;

  friend bool operator==(const PropertySpec&, const PropertySpec&) = default;
};

// "+1879-03-14T00:00:00Z" at precision 11 -> "1879-03-14"; precision 10
// keeps year-month, anything coarser keeps the year.
std::string NormalizeTime(std::string_view wikidata_time, int precision);

// Drops the explicit '+' sign Wikidata puts on amounts. No unit handling.
std::string NormalizeQuantity(std::string_view amount);

enum class Compression { kAuto, kNone, kGzip, kBzip2 };

absl::StatusOr<Compression> ParseCompression(std::string_view hint);

// Streams entities out of a Wikidata JSON dump: either the canonical
// "[\n{...},\n{...}\n]" layout with one entity per line or plain JSONL.
// Items are yielded in file order; property entities are collected on the
// side and exposed through properties(). Memory use does not grow with the
// number of lines read.
class EntityStream {
 public:
  // Lines needed before the malformed-line ratio is judged at all.
  static constexpr int64_t kMinLinesForCorruptionCheck = 100;
  // After this many lines the ratio is also checked while streaming.
  static constexpr int64_t kStreamingCorruptionWindow = 10000;
  static constexpr double kMaxMalformedFraction = 0.01;

  static absl::StatusOr<std::unique_ptr<EntityStream>> Open(
      const std::string& path, Compression compression = Compression::kAuto);

  // Takes ownership of an already-decompressed stream.
  explicit EntityStream(std::unique_ptr<std::istream> input);
  ~EntityStream();

  EntityStream(const EntityStream&) = delete;
  EntityStream& operator=(const EntityStream&) = delete;

  // Next item entity, std::nullopt at end of input, or an error when the
  // source cannot be read or the corruption threshold is exceeded.
  absl::StatusOr<std::optional<EntityRecord>> Next();

  int64_t lines_read() const { return lines_read_; }
  int64_t malformed_lines() const { return malformed_lines_; }
  int64_t malformed_claims() const { return malformed_claims_; }
  const std::vector<PropertySpec>& properties() const { return properties_; }

 private:
  struct Source;

  absl::Status CheckCorruption(bool at_end) const;

  std::unique_ptr<Source> source_;
  std::unique_ptr<std::istream> input_;
  int64_t lines_read_ = 0;
  int64_t malformed_lines_ = 0;
  int64_t malformed_claims_ = 0;
  bool finished_ = false;
  std::vector<PropertySpec> properties_;
};

// Parsed content of one dump line.
struct DumpLine {
  enum class Kind { kItem, kProperty, kIgnored };
  Kind kind = Kind::kIgnored;
  EntityRecord item;
  PropertySpec property;
  int64_t malformed_claims = 0;
};

// Parses one line (trailing comma allowed). Returns InvalidArgument for
// lines that are not a well-formed entity object.
absl::StatusOr<DumpLine> ParseDumpLine(std::string_view line);

}  // namespace memaudit

#endif  // MEMAUDIT_WIKIDATA_H_
