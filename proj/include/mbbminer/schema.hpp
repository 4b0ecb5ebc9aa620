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

#ifndef MBBMINER_SCHEMA_HPP
#define MBBMINER_SCHEMA_HPP

#include <chrono>
#include <cmath>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mbbminer/time.hpp"

namespace mbbminer {

// A single observation value. Numeric values are always finite.
using FeatureValue = std::variant<std::monostate, double, std::string>;

inline bool is_null(const FeatureValue& v) { return std::holds_alternative<std::monostate>(v); }
inline bool is_numeric(const FeatureValue& v) { return std::holds_alternative<double>(v); }
inline bool is_categorical(const FeatureValue& v) { return std::holds_alternative<std::string>(v); }

enum class FeatureKind { kNumeric, kCategorical, kEvent };
enum class Aggregation { kMean, kMin, kMax, kMode };
enum class Orientation { kNone, kLowerIsBetter, kHigherIsBetter };

inline constexpr Duration kDefaultLastValueTolerance = std::chrono::seconds(60);
inline constexpr Duration kDefaultInterpolateMaxGap = std::chrono::seconds(300);
inline constexpr Duration kDefaultWindowMeanWidth = std::chrono::seconds(60);

// Linear interpolation between the bracketing observations; Null when they
// are further apart than max_gap or when t lies outside the observed hull.
struct Interpolate {
  Duration max_gap = kDefaultInterpolateMaxGap;
  bool operator==(const Interpolate&) const = default;
};
// As-of join: the most recent observation no older than tolerance.
struct LastValue {
  Duration tolerance = kDefaultLastValueTolerance;
  bool operator==(const LastValue&) const = default;
};
// Mean of numeric observations in the trailing window [t - width, t).
struct WindowMean {
  Duration width = kDefaultWindowMeanWidth;
  bool operator==(const WindowMean&) const = default;
};
// "active"/"inactive" driven by start/stop event categories.
struct StateTrack {
  std::set<std::string> start_events;
  std::set<std::string> stop_events;
  bool operator==(const StateTrack&) const = default;
};
using MergeStrategy = std::variant<Interpolate, LastValue, WindowMean, StateTrack>;

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::kNumeric;
  std::string unit;
  Aggregation aggregation = Aggregation::kMean;
  MergeStrategy merge = LastValue{};
  Orientation orientation = Orientation::kNone;

  bool operator==(const FeatureSpec&) const = default;
};

struct Schema {
  std::vector<FeatureSpec> features;
  std::string time_field = "ts";
  std::string node_field = "node";
  std::string interface_field = "iface";
  std::string latitude_field = "latitude";
  std::string longitude_field = "longitude";
  std::string operator_field = "operator";

  const FeatureSpec* find(std::string_view name) const;
  const FeatureSpec& at(std::string_view name) const;
  std::vector<std::string> feature_names() const;

  // Throws Error(kInvalidArgument) when an invariant is violated.
  void validate() const;

  bool operator==(const Schema&) const = default;
};

std::string_view kind_name(FeatureKind kind);
std::string_view aggregation_name(Aggregation agg);
std::string_view orientation_name(Orientation o);

// Throws Error(kStrategyKindMismatch) for e.g. Interpolate on a categorical.
void check_strategy(const MergeStrategy& strategy, const FeatureSpec& spec);

// Key/value schema document; grammar in docs/schema.md.
Schema parse_schema(std::string_view text);
Schema load_schema(const std::string& path);
std::string format_schema(const Schema& schema);

// RTT, radio context, mode/cell, events, operator and GPS.
Schema default_schema();

}  // namespace mbbminer

#endif  // MBBMINER_SCHEMA_HPP
