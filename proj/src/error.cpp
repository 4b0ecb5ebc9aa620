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

#include "mbbminer/error.hpp"

namespace mbbminer {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kSchemaMismatch: return "schema_mismatch";
    case ErrorCode::kStorageIO: return "storage_io";
    case ErrorCode::kUnknownKey: return "unknown_key";
    case ErrorCode::kLevelNotCoarser: return "level_not_coarser";
    case ErrorCode::kUnsortedInput: return "unsorted_input";
    case ErrorCode::kMissingGeoFeatures: return "missing_geo_features";
    case ErrorCode::kStrategyKindMismatch: return "strategy_kind_mismatch";
    case ErrorCode::kTooFewPoints: return "too_few_points";
    case ErrorCode::kInsufficientData: return "insufficient_data";
    case ErrorCode::kNoUsableFeatures: return "no_usable_features";
    case ErrorCode::kUnfittedModel: return "unfitted_model";
    case ErrorCode::kInvalidCounts: return "invalid_counts";
    case ErrorCode::kNoAnomalousInstances: return "no_anomalous_instances";
    case ErrorCode::kInvalidR: return "invalid_r";
    case ErrorCode::kTimeout: return "timeout";
  }
  return "unknown";
}

}  // namespace mbbminer
