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

#ifndef MBBMINER_INGEST_HPP
#define MBBMINER_INGEST_HPP

#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mbbminer/schema.hpp"
#include "mbbminer/time.hpp"

namespace mbbminer {

class SeriesStore;

struct MeasurementRecord {
  Timestamp ts;
  std::string node_id;
  std::string interface_id;
  std::map<std::string, FeatureValue> values;

  bool operator==(const MeasurementRecord&) const = default;
};

enum class InputFormat { kNdjson, kCsv };

struct ParseError {
  int line = 0;
  std::string reason;
};

struct ParseOptions {
  // Unknown fields become errors instead of warnings.
  bool strict = false;
};

struct ParseResult {
  std::vector<MeasurementRecord> records;
  std::vector<ParseError> errors;
  std::vector<ParseError> warnings;
  // Nonblank data lines seen (CSV header excluded).
  std::size_t lines = 0;
};

// Never throws on malformed lines; each produces a ParseError. A missing CSV
// header is reported as an error on line 1.
ParseResult parse_records(std::istream& in, const Schema& schema, InputFormat format,
                          const ParseOptions& options = {});

// One NDJSON line per record, integer-nanosecond timestamps.
std::string serialize_ndjson(std::span<const MeasurementRecord> records, const Schema& schema);

// Throws Error(kInvalidArgument) describing the first violation.
void validate_record(const MeasurementRecord& record, const Schema& schema);

struct TimeExtent {
  Timestamp first;
  Timestamp last;
  bool operator==(const TimeExtent&) const = default;
};

struct LoadReport {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::optional<TimeExtent> time_extent;
  std::vector<std::string> rejections;
};

// Appends to the store's base partitions and refreshes coarser levels.
// Throws Error(kSchemaMismatch) when `record_schema` disagrees with the
// store's schema on any shared feature.
LoadReport load(std::span<const MeasurementRecord> records, const Schema& record_schema,
                SeriesStore& store);

}  // namespace mbbminer

#endif  // MBBMINER_INGEST_HPP
