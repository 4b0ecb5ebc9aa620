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

#ifndef MBBMINER_BUCKET_HPP
#define MBBMINER_BUCKET_HPP

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mbbminer/schema.hpp"
#include "mbbminer/time.hpp"

namespace mbbminer {

// Double-double accumulator (TwoSum + renormalisation). While the running
// total fits in ~106 bits the pair (hi, lo) is the exact sum with
// hi == round-to-nearest(sum), so any grouping of the same addends yields
// bit-identical hi. Coarse-level means therefore do not depend on the
// resampling path.
struct ExactSum {
  double hi = 0.0;
  double lo = 0.0;

  void add(double x) {
    const double s = hi + x;
    const double bp = s - hi;
    const double err = (hi - (s - bp)) + (x - bp);
    const double l = lo + err;
    hi = s + l;
    lo = l - (hi - s);
  }
  void add(const ExactSum& other) {
    add(other.hi);
    add(other.lo);
  }
  double value() const { return hi; }
  bool operator==(const ExactSum&) const = default;
};

// Aggregate of all observations whose time falls in [start, start + level).
struct Bucket {
  Timestamp start;
  FeatureValue value;
  std::uint64_t count = 0;
  // Numeric features only.
  double min = 0.0;
  double max = 0.0;
  ExactSum sum;
  // Categorical and event features only: observations per category.
  std::map<std::string, std::uint64_t> categories;

  bool operator==(const Bucket&) const = default;
};

struct GranularityLadder {
  // Strictly increasing; each an integer multiple of the previous.
  std::vector<Duration> levels;

  // 10 ms, 1 s, 1 min, 30 min.
  static GranularityLadder standard();

  void validate() const;
  Duration base() const { return levels.front(); }
  Duration coarsest() const { return levels.back(); }
  bool contains(Duration level) const;
  bool operator==(const GranularityLadder&) const = default;
};

// Finest level whose expected point count span/level does not exceed
// max_points; the coarsest level when none does.
Duration choose_level(const GranularityLadder& ladder, Duration span, std::int64_t max_points);

struct Observation {
  Timestamp ts;
  FeatureValue value;
  bool operator==(const Observation&) const = default;
};

// Groups time-sorted observations into buckets of width `level`. Null
// observations are skipped.
std::vector<Bucket> bucketize(std::span<const Observation> observations, Duration level,
                              const FeatureSpec& spec);

// Aggregates buckets at `from_level` into `to_level` buckets; intervals with
// no input produce no bucket. Throws Error(kLevelNotCoarser) unless to_level
// is a positive multiple of from_level and Error(kUnsortedInput) unless
// starts are strictly increasing.
std::vector<Bucket> resample(std::span<const Bucket> series, Duration from_level, Duration to_level,
                             const FeatureSpec& spec);

// Recomputes `value` from the carried statistics per the feature's
// aggregation (mode ties go to the lexicographically smallest category).
void finalize_bucket(Bucket& bucket, const FeatureSpec& spec);

}  // namespace mbbminer

#endif  // MBBMINER_BUCKET_HPP
