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

#ifndef MBBMINER_TIME_HPP
#define MBBMINER_TIME_HPP

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace mbbminer {

using Duration = std::chrono::nanoseconds;
// Nanoseconds since the Unix epoch, UTC.
using Timestamp = std::chrono::sys_time<Duration>;

inline constexpr Timestamp from_ns(std::int64_t ns) { return Timestamp{Duration{ns}}; }
inline constexpr std::int64_t to_ns(Timestamp ts) { return ts.time_since_epoch().count(); }
inline double to_seconds(Duration d) { return std::chrono::duration<double>(d).count(); }

// Accepts RFC3339 ("2018-06-03T12:00:00.25Z", "...+02:00") or a bare
// integer of epoch nanoseconds. Returns nullopt on malformed input.
std::optional<Timestamp> parse_timestamp(std::string_view text);

// RFC3339 UTC with a nanosecond fraction only when nonzero.
std::string format_timestamp(Timestamp ts);

// "10ms", "1s", "5min", "1m", "30m", "2h", "1d", "250us", "17ns", or a bare
// integer of nanoseconds. "m" and "min" both mean minutes.
std::optional<Duration> parse_duration(std::string_view text);

// Largest unit that divides the duration exactly: "10ms", "1s", "1m", "30m".
std::string format_duration(Duration d);

// Start of the half-open interval of width `level` containing `ts`.
inline Timestamp floor_to(Timestamp ts, Duration level) {
  const std::int64_t t = to_ns(ts);
  const std::int64_t w = level.count();
  std::int64_t q = t / w;
  if (t % w != 0 && t < 0) --q;
  return from_ns(q * w);
}

}  // namespace mbbminer

#endif  // MBBMINER_TIME_HPP
