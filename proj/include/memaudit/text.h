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

#ifndef MEMAUDIT_TEXT_H_
#define MEMAUDIT_TEXT_H_

#include <string>
#include <string_view>
#include <vector>

namespace memaudit {

// Trims and collapses internal runs of ASCII whitespace to a single space.
std::string NormalizeWhitespace(std::string_view text);

// NormalizeWhitespace followed by ASCII lower-casing. Used wherever two
// labels are compared for identity.
std::string NormalizeLabel(std::string_view text);

std::vector<std::string> SplitWhitespace(std::string_view text);

std::string JoinStrings(const std::vector<std::string>& parts,
                        std::string_view separator);

// Splits UTF-8 text into code points. Invalid bytes are kept as
// single-byte units so the operation never loses data.
std::vector<std::string> Utf8CodePoints(std::string_view text);

std::string ReverseUtf8(std::string_view text);

// Upper-cases the first letter and lower-cases the rest. Covers ASCII and
// the Latin-1 letters; other code points pass through untouched.
std::string CapitalizeWord(std::string_view text);

size_t CountOccurrences(std::string_view text, std::string_view needle);

// Replaces every occurrence of `needle` in `text`.
std::string ReplaceAll(std::string_view text, std::string_view needle,
                       std::string_view replacement);

bool StartsWith(std::string_view text, std::string_view prefix);
bool EndsWith(std::string_view text, std::string_view suffix);

}  // namespace memaudit

#endif  // MEMAUDIT_TEXT_H_
