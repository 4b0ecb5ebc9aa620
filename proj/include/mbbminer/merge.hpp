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

#ifndef MBBMINER_MERGE_HPP
#define MBBMINER_MERGE_HPP

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mbbminer/bucket.hpp"
#include "mbbminer/schema.hpp"
#include "mbbminer/time.hpp"

namespace mbbminer {

enum class Label { kRegular, kAnomalous };

// One time-aligned feature vector; the unit of mining.
struct Instance {
  Timestamp ts;
  std::string node_id;
  std::string interface_id;
  std::map<std::string, FeatureValue> values;
  std::optional<Label> label;

  const FeatureValue& value(const std::string& feature) const;
  bool operator==(const Instance&) const = default;
};

// floor((t1 - t0) / step) ticks: t0, t0 + step, ...
struct Axis {
  Timestamp t0;
  Timestamp t1;
  Duration step;

  std::size_t size() const;
  Timestamp tick(std::size_t i) const { return t0 + step * static_cast<std::int64_t>(i); }
};

struct FeatureStream {
  std::string name;
  FeatureKind kind = FeatureKind::kNumeric;
  MergeStrategy strategy;
  // Sorted by start; bucket start is the observation time.
  std::span<const Bucket> buckets;
};

// One Instance per axis tick. Throws Error(kStrategyKindMismatch) for a
// strategy that does not fit the stream's kind, Error(kInvalidArgument) for a
// non-positive step and Error(kUnsortedInput) for an unsorted stream.
std::vector<Instance> merge(std::span<const FeatureStream> streams, const Axis& axis,
                            const std::string& node_id = {}, const std::string& interface_id = {});

struct StateChange {
  Timestamp ts;
  bool active = false;
  bool operator==(const StateChange&) const = default;
};

inline constexpr const char* kStateActive = "active";
inline constexpr const char* kStateInactive = "inactive";

// First entry is the state at t0 (events at or before t0 applied, inactive
// when there are none); then one entry per actual transition after t0.
// Categories outside the start/stop sets are ignored.
std::vector<StateChange> state_timeline(std::span<const Bucket> events, const StateTrack& spec,
                                        Timestamp t0);

}  // namespace mbbminer

#endif  // MBBMINER_MERGE_HPP
