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

#include "mbbminer/bucket.hpp"

#include <algorithm>

#include "mbbminer/error.hpp"

namespace mbbminer {

GranularityLadder GranularityLadder::standard() {
  using namespace std::chrono;
  return GranularityLadder{{milliseconds(10), seconds(1), minutes(1), minutes(30)}};
}

void GranularityLadder::validate() const {
  if (levels.empty()) throw Error(ErrorCode::kInvalidArgument, "granularity ladder is empty");
  if (levels.front() <= Duration::zero()) {
    throw Error(ErrorCode::kInvalidArgument, "granularity levels must be positive");
  }
  for (std::size_t i = 1; i < levels.size(); ++i) {
    if (levels[i] <= levels[i - 1] || levels[i].count() % levels[i - 1].count() != 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "granularity " + format_duration(levels[i]) + " is not a strictly larger multiple of " +
                      format_duration(levels[i - 1]));
    }
  }
}

bool GranularityLadder::contains(Duration level) const {
  return std::find(levels.begin(), levels.end(), level) != levels.end();
}

Duration choose_level(const GranularityLadder& ladder, Duration span, std::int64_t max_points) {
  const std::int64_t s = span.count();
  for (Duration level : ladder.levels) {
    const std::int64_t w = level.count();
    // span / level <= max_points, in exact integer arithmetic.
    const std::int64_t q = s / w;
    if (q < max_points || (q == max_points && s % w == 0)) return level;
  }
  return ladder.coarsest();
}

void finalize_bucket(Bucket& b, const FeatureSpec& spec) {
  if (spec.kind == FeatureKind::kNumeric) {
    switch (spec.aggregation) {
      case Aggregation::kMin: b.value = b.min; break;
      case Aggregation::kMax: b.value = b.max; break;
      default: b.value = b.sum.value() / static_cast<double>(b.count); break;
    }
    return;
  }
  const std::string* best = nullptr;
  std::uint64_t best_count = 0;
  // std::map iterates in ascending order, so strict '>' keeps the
  // lexicographically smallest category on ties.
  for (const auto& [category, n] : b.categories) {
    if (n > best_count) {
      best = &category;
      best_count = n;
    }
  }
  b.value = best ? FeatureValue{*best} : FeatureValue{};
}

namespace {

void absorb(Bucket& into, const Bucket& from, bool numeric) {
  if (numeric) {
    if (into.count == 0) {
      into.min = from.min;
      into.max = from.max;
    } else {
      into.min = std::min(into.min, from.min);
      into.max = std::max(into.max, from.max);
    }
    into.sum.add(from.sum);
  } else {
    for (const auto& [category, n] : from.categories) into.categories[category] += n;
  }
  into.count += from.count;
}

}  // namespace

std::vector<Bucket> bucketize(std::span<const Observation> observations, Duration level,
                              const FeatureSpec& spec) {
  if (level <= Duration::zero()) throw Error(ErrorCode::kInvalidArgument, "level must be positive");
  const bool numeric = spec.kind == FeatureKind::kNumeric;
  std::vector<Bucket> out;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const auto& obs = observations[i];
    if (i > 0 && obs.ts < observations[i - 1].ts) {
      throw Error(ErrorCode::kUnsortedInput, "observations are not sorted by time");
    }
    if (is_null(obs.value)) continue;
    const Timestamp start = floor_to(obs.ts, level);
    if (out.empty() || out.back().start != start) {
      if (!out.empty()) finalize_bucket(out.back(), spec);
      out.push_back(Bucket{});
      out.back().start = start;
    }
    Bucket& b = out.back();
    if (numeric) {
      const double v = std::get<double>(obs.value);
      if (b.count == 0) {
        b.min = b.max = v;
      } else {
        b.min = std::min(b.min, v);
        b.max = std::max(b.max, v);
      }
      b.sum.add(v);
    } else {
      b.categories[std::get<std::string>(obs.value)] += 1;
    }
    b.count += 1;
  }
  if (!out.empty()) finalize_bucket(out.back(), spec);
  return out;
}

std::vector<Bucket> resample(std::span<const Bucket> series, Duration from_level, Duration to_level,
                             const FeatureSpec& spec) {
  if (from_level <= Duration::zero() || to_level < from_level ||
      to_level.count() % from_level.count() != 0) {
    throw Error(ErrorCode::kLevelNotCoarser, format_duration(to_level) +
                                                 " is not a coarser multiple of " +
                                                 format_duration(from_level));
  }
  const bool numeric = spec.kind == FeatureKind::kNumeric;
  std::vector<Bucket> out;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const Bucket& b = series[i];
    if (i > 0 && b.start <= series[i - 1].start) {
      throw Error(ErrorCode::kUnsortedInput, "bucket starts are not strictly increasing");
    }
    if (b.count == 0) continue;
    const Timestamp start = floor_to(b.start, to_level);
    if (out.empty() || out.back().start != start) {
      if (!out.empty()) finalize_bucket(out.back(), spec);
      out.push_back(Bucket{});
      out.back().start = start;
    }
    absorb(out.back(), b, numeric);
  }
  if (!out.empty()) finalize_bucket(out.back(), spec);
  return out;
}

}  // namespace mbbminer
