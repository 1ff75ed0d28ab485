// Copyright 2026 The mvrisk Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MVRISK_ERROR_HPP_
#define MVRISK_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace mvrisk {

// Error categories. Each maps to a distinct C API status and CLI exit code.
enum class ErrorCode {
  kUsage = 1,           // API misuse (non-scalar backward, empty batch, ...)
  kShape,               // tensor shape mismatch
  kConfig,              // invalid configuration or schema
  kIo,                  // unreadable / unwritable file
  kSchemaMismatch,      // checkpoint and cohort disagree on schema
  kIngest,              // malformed cohort data
  kUndefinedMetric,     // metric undefined for the given labels
  kNumeric,             // non-finite values during training
  kUnattainable,        // requested operating point cannot be reached
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace mvrisk

#endif  // MVRISK_ERROR_HPP_
