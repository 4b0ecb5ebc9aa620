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

// Synthetic fixtures shared by the unit tests and the acceptance binary.

#ifndef MBBMINER_TESTS_FIXTURES_HPP
#define MBBMINER_TESTS_FIXTURES_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mbbminer/detect.hpp"
#include "mbbminer/ingest.hpp"
#include "mbbminer/merge.hpp"
#include "mbbminer/rootcause.hpp"
#include "mbbminer/time.hpp"

namespace mbbminer::testing {

// 2018-06-03T12:00:00Z
inline constexpr std::int64_t kT0 = 1528027200LL * 1000000000LL;
inline Timestamp t0() { return from_ns(kT0); }
inline Timestamp at_s(double seconds) {
  return from_ns(kT0 + static_cast<std::int64_t>(seconds * 1e9));
}

// 1 Hz for 1200 s: 100 +- 1 until 600 s, then 250 +- 1.
std::vector<Point> step_series(std::uint64_t seed = 7);
inline constexpr double kStepChangeSeconds = 600.0;

// 1 Hz for 2 h at 100 +- 1; every 20 s inside [3600 s, 4500 s) the sample
// reads 80 +- 1 instead.
std::vector<Point> dip_series(std::uint64_t seed = 11);
inline constexpr double kDipStartSeconds = 3600.0;
inline constexpr double kDipEndSeconds = 4500.0;
std::vector<Timestamp> dip_injected(const std::vector<Point>& series);

// Records of one numeric feature for one interface.
std::vector<MeasurementRecord> to_records(const std::vector<Point>& series, const std::string& node,
                                          const std::string& iface, const std::string& feature);

// Step series plus an event_type stream at 1 Hz: "task_started" on 90% of
// the seconds in [600 s, 630 s) and on 10% elsewhere, "idle" otherwise.
std::vector<MeasurementRecord> step_event_records(std::uint64_t seed = 17);

// Baseline fixture: rtt = 50 on LTE and 150 on 3G (+ noise), rsrq unrelated
// to rtt. Training has a few 3G instances; evaluation has a 3G epoch.
struct BaselineFixture {
  std::vector<Instance> train;
  std::vector<Instance> eval;
  Timestamp epoch_start;
  Timestamp epoch_end;  // exclusive
};
BaselineFixture baseline_fixture(std::uint64_t seed = 3);

// N instances, K anomalous. The planted value "cause=a" covers 90% of the
// anomalous and 10% of the regular instances; noise features are independent.
LabeledDataset planted_cause(std::uint64_t seed = 5, std::size_t N = 1000, std::size_t K = 100);
// Labels drawn independently of the same kind of features.
LabeledDataset null_dataset(std::uint64_t seed, std::size_t N = 1000, std::size_t K = 100);

// Five interfaces each with a region over [12:00, 12:05) of a 24 h span
// (00:00 to 24:00), plus sparse singleton regions in distinct buckets.
struct FleetFixture {
  std::map<std::string, std::vector<AnomalyRegion>> regions;
  Timestamp from;
  Timestamp to;
  Duration bucket = std::chrono::minutes(5);
};
FleetFixture fleet_fixture(std::uint64_t seed = 13);
FleetFixture random_fleet(std::uint64_t seed);

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace mbbminer::testing

#endif  // MBBMINER_TESTS_FIXTURES_HPP
