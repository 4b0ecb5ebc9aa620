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

#include "mbbminer/merge.hpp"

#include <algorithm>
#include <type_traits>

#include "mbbminer/error.hpp"

namespace mbbminer {

const FeatureValue& Instance::value(const std::string& feature) const {
  static const FeatureValue kNull{};
  auto it = values.find(feature);
  return it == values.end() ? kNull : it->second;
}

std::size_t Axis::size() const {
  if (t1 <= t0 || step <= Duration::zero()) return 0;
  return static_cast<std::size_t>((t1 - t0).count() / step.count());
}

namespace {

FeatureValue state_value(bool active) {
  return FeatureValue{std::string(active ? kStateActive : kStateInactive)};
}

// Fills column `f` of `out` for one stream.
void merge_stream(const FeatureStream& s, const Axis& axis, std::vector<Instance>& out) {
  const auto& b = s.buckets;
  const std::size_t n = out.size();

  std::visit(
      [&](const auto& strategy) {
        using S = std::decay_t<decltype(strategy)>;
        if constexpr (std::is_same_v<S, LastValue>) {
          std::size_t j = 0;  // buckets with start <= t
          for (std::size_t i = 0; i < n; ++i) {
            const Timestamp t = axis.tick(i);
            while (j < b.size() && b[j].start <= t) ++j;
            FeatureValue v;
            if (j > 0 && t - b[j - 1].start <= strategy.tolerance) v = b[j - 1].value;
            out[i].values[s.name] = std::move(v);
          }
        } else if constexpr (std::is_same_v<S, Interpolate>) {
          std::size_t j = 0;
          for (std::size_t i = 0; i < n; ++i) {
            const Timestamp t = axis.tick(i);
            while (j < b.size() && b[j].start <= t) ++j;
            FeatureValue v;
            if (j > 0 && b[j - 1].start == t) {
              v = b[j - 1].value;
            } else if (j > 0 && j < b.size() && b[j].start - b[j - 1].start <= strategy.max_gap) {
              const double v0 = std::get<double>(b[j - 1].value);
              const double v1 = std::get<double>(b[j].value);
              const double frac = static_cast<double>((t - b[j - 1].start).count()) /
                                  static_cast<double>((b[j].start - b[j - 1].start).count());
              const double x = v0 + frac * (v1 - v0);
              v = std::clamp(x, std::min(v0, v1), std::max(v0, v1));
            }
            out[i].values[s.name] = std::move(v);
          }
        } else if constexpr (std::is_same_v<S, WindowMean>) {
          std::size_t lo = 0, hi = 0;  // window is [lo, hi)
          for (std::size_t i = 0; i < n; ++i) {
            const Timestamp t = axis.tick(i);
            while (hi < b.size() && b[hi].start < t) ++hi;
            while (lo < hi && b[lo].start < t - strategy.width) ++lo;
            ExactSum sum;
            std::uint64_t count = 0;
            for (std::size_t k = lo; k < hi; ++k) {
              sum.add(b[k].sum);
              count += b[k].count;
            }
            out[i].values[s.name] =
                count ? FeatureValue{sum.value() / static_cast<double>(count)} : FeatureValue{};
          }
        } else {
          const auto timeline = state_timeline(b, strategy, axis.t0);
          std::size_t j = 0;
          for (std::size_t i = 0; i < n; ++i) {
            const Timestamp t = axis.tick(i);
            while (j + 1 < timeline.size() && timeline[j + 1].ts <= t) ++j;
            out[i].values[s.name] = state_value(timeline[j].active);
          }
        }
      },
      s.strategy);
}

}  // namespace

std::vector<Instance> merge(std::span<const FeatureStream> streams, const Axis& axis,
                            const std::string& node_id, const std::string& interface_id) {
  if (axis.step <= Duration::zero()) throw Error(ErrorCode::kInvalidArgument, "axis step must be positive");
  for (const auto& s : streams) {
    FeatureSpec spec;
    spec.name = s.name;
    spec.kind = s.kind;
    check_strategy(s.strategy, spec);
    for (std::size_t i = 1; i < s.buckets.size(); ++i) {
      if (s.buckets[i].start < s.buckets[i - 1].start) {
        throw Error(ErrorCode::kUnsortedInput, "stream '" + s.name + "' is not sorted");
      }
    }
    if (s.kind == FeatureKind::kNumeric) {
      for (const auto& b : s.buckets) {
        if (!is_numeric(b.value)) {
          throw Error(ErrorCode::kStrategyKindMismatch, "stream '" + s.name + "' has non-numeric buckets");
        }
      }
    }
  }
  std::vector<Instance> out(axis.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].ts = axis.tick(i);
    out[i].node_id = node_id;
    out[i].interface_id = interface_id;
  }
  for (const auto& s : streams) merge_stream(s, axis, out);
  return out;
}

std::vector<StateChange> state_timeline(std::span<const Bucket> events, const StateTrack& spec,
                                        Timestamp t0) {
  std::vector<StateChange> out{{t0, false}};
  for (const auto& e : events) {
    const auto* category = std::get_if<std::string>(&e.value);
    if (!category) continue;
    bool next;
    if (spec.start_events.count(*category)) next = true;
    else if (spec.stop_events.count(*category)) next = false;
    else continue;
    if (e.start <= t0) {
      out.front().active = next;
    } else if (next != out.back().active) {
      out.push_back({e.start, next});
    }
  }
  return out;
}

}  // namespace mbbminer
