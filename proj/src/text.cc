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

#include "memaudit/text.h"

#include <algorithm>
#include <cctype>

namespace memaudit {
namespace {

bool IsSpace(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

size_t Utf8Length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

}  // namespace

std::string NormalizeWhitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (IsSpace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(c);
  }
  return out;
}

std::string NormalizeLabel(std::string_view text) {
  std::string out = NormalizeWhitespace(text);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::vector<std::string> SplitWhitespace(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (IsSpace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string JoinStrings(const std::vector<std::string>& parts,
                        std::string_view separator) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out.append(separator);
    out.append(parts[i]);
  }
  return out;
}

std::vector<std::string> Utf8CodePoints(std::string_view text) {
  std::vector<std::string> points;
  size_t i = 0;
  while (i < text.size()) {
    size_t len = Utf8Length(static_cast<unsigned char>(text[i]));
    if (i + len > text.size()) len = 1;
    for (size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    }
    points.emplace_back(text.substr(i, len));
    i += len;
  }
  return points;
}

std::string ReverseUtf8(std::string_view text) {
  std::vector<std::string> points = Utf8CodePoints(text);
  std::reverse(points.begin(), points.end());
  return JoinStrings(points, "");
}

std::string CapitalizeWord(std::string_view text) {
  std::string out(text);
  bool first = true;
  for (size_t i = 0; i < out.size();) {
    size_t len = Utf8Length(static_cast<unsigned char>(out[i]));
    if (len == 1) {
      unsigned char c = static_cast<unsigned char>(out[i]);
      out[i] = static_cast<char>(first ? std::toupper(c) : std::tolower(c));
    } else if (len == 2 && i + 1 < out.size() &&
               static_cast<unsigned char>(out[i]) == 0xC3) {
      // Latin-1 letters: U+00C0..U+00DE upper, U+00E0..U+00FE lower; the
      // multiplication and division signs sit at 0x97 / 0xB7.
      unsigned char c = static_cast<unsigned char>(out[i + 1]);
      if (first && c >= 0xA0 && c <= 0xBE && c != 0xB7) c -= 0x20;
      if (!first && c >= 0x80 && c <= 0x9E && c != 0x97) c += 0x20;
      out[i + 1] = static_cast<char>(c);
    }
    first = false;
    i += len;
  }
  return out;
}

size_t CountOccurrences(std::string_view text, std::string_view needle) {
  if (needle.empty()) return 0;
  size_t count = 0;
  for (size_t pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

std::string ReplaceAll(std::string_view text, std::string_view needle,
                       std::string_view replacement) {
  if (needle.empty()) return std::string(text);
  std::string out;
  size_t start = 0;
  for (size_t pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, start)) {
    out.append(text.substr(start, pos - start));
    out.append(replacement);
    start = pos + needle.size();
  }
  out.append(text.substr(start));
  return out;
}

bool StartsWith(std::string_view text, std::string_view prefix) {
  return text.substr(0, prefix.size()) == prefix;
}

bool EndsWith(std::string_view text, std::string_view suffix) {
  return text.size() >= suffix.size() &&
         text.substr(text.size() - suffix.size()) == suffix;
}

}  // namespace memaudit
