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

#ifndef MEMAUDIT_FILE_UTIL_H_
#define MEMAUDIT_FILE_UTIL_H_

#include <string>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace memaudit {

absl::StatusOr<std::string> ReadFile(const std::string& path);

// Creates parent directories as needed.
absl::Status WriteFile(const std::string& path, const std::string& contents);

absl::Status MakeDirectories(const std::string& path);

}  // namespace memaudit

#endif  // MEMAUDIT_FILE_UTIL_H_
