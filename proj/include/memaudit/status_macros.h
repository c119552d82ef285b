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

#ifndef MEMAUDIT_STATUS_MACROS_H_
#define MEMAUDIT_STATUS_MACROS_H_

#include "absl/status/status.h"
#include "absl/status/statusor.h"

#define MEMAUDIT_CONCAT_INNER_(a, b) a##b
#define MEMAUDIT_CONCAT_(a, b) MEMAUDIT_CONCAT_INNER_(a, b)

#define MEMAUDIT_RETURN_IF_ERROR(expr)         \
  do {                                         \
    ::absl::Status _memaudit_status = (expr);  \
    if (!_memaudit_status.ok()) {              \
      return _memaudit_status;                 \
    }                                          \
  } while (false)

#define MEMAUDIT_ASSIGN_OR_RETURN_IMPL_(tmp, lhs, rexpr) \
  auto tmp = (rexpr);                                   \
  if (!tmp.ok()) {                                      \
    return tmp.status();                                \
  }                                                     \
  lhs = std::move(tmp).value()

#define MEMAUDIT_ASSIGN_OR_RETURN(lhs, rexpr) \
  MEMAUDIT_ASSIGN_OR_RETURN_IMPL_(            \
      MEMAUDIT_CONCAT_(_memaudit_statusor_, __LINE__), lhs, rexpr)

#endif  // MEMAUDIT_STATUS_MACROS_H_
