/*
 * Copyright 2026 The mbbminer Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MBBMINER_ERROR_HPP
#define MBBMINER_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace mbbminer {

enum class ErrorCode {
  kInvalidArgument,
  kParse,
  kSchemaMismatch,
  kStorageIO,
  kUnknownKey,
  kLevelNotCoarser,
  kUnsortedInput,
  kMissingGeoFeatures,
  kStrategyKindMismatch,
  kTooFewPoints,
  kInsufficientData,
  kNoUsableFeatures,
  kUnfittedModel,
  kInvalidCounts,
  kNoAnomalousInstances,
  kInvalidR,
  kTimeout,
};

std::string_view error_code_name(ErrorCode code);

// All library failures surface as this exception; the code decides how the
// CLI and service report them.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mbbminer

#endif  // MBBMINER_ERROR_HPP
