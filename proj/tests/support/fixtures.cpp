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

#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <unistd.h>

#include "mbbminer/random.hpp"

namespace mbbminer::testing {

std::vector<Point> step_series(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Point> out;
  for (int i = 0; i < 1200; ++i) {
    const double level = i < 600 ? 100.0 : 250.0;
    out.push_back({at_s(i), level + rng.uniform(-1.0, 1.0)});
  }
  return out;
}

std::vector<Point> dip_series(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Point> out;
  for (int i = 0; i < 7200; ++i) {
    const bool dip = i >= kDipStartSeconds && i < kDipEndSeconds && i % 20 == 0;
    out.push_back({at_s(i), (dip ? 80.0 : 100.0) + rng.uniform(-1.0, 1.0)});
  }
  return out;
}

std::vector<Timestamp> dip_injected(const std::vector<Point>& series) {
  std::vector<Timestamp> out;
  for (const auto& p : series) {
    if (p.value < 90.0) out.push_back(p.ts);
  }
  return out;
}

std::vector<MeasurementRecord> to_records(const std::vector<Point>& series, const std::string& node,
                                          const std::string& iface, const std::string& feature) {
  std::vector<MeasurementRecord> out;
  out.reserve(series.size());
  for (const auto& p : series) out.push_back({p.ts, node, iface, {{feature, p.value}}});
  return out;
}

std::vector<MeasurementRecord> step_event_records(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<MeasurementRecord> out = to_records(step_series(seed), "n1", "i1", "rtt");
  for (std::size_t i = 0; i < out.size(); ++i) {
    const bool in_region = i >= 600 && i < 630;
    const bool started = rng.uniform() < (in_region ? 0.9 : 0.1);
    out[i].values["event_type"] = std::string(started ? "task_started" : "idle");
  }
  return out;
}

namespace {

Instance baseline_instance(Timestamp ts, bool is3g, Rng& rng) {
  Instance x;
  x.ts = ts;
  x.node_id = "n1";
  x.interface_id = "i1";
  x.values["device_mode"] = std::string(is3g ? "3G" : "LTE");
  x.values["rsrq"] = rng.uniform(-15.0, -5.0);
  x.values["rtt"] = (is3g ? 150.0 : 50.0) + rng.normal(0.0, 2.0);
  return x;
}

}  // namespace

BaselineFixture baseline_fixture(std::uint64_t seed) {
  Rng rng(seed);
  BaselineFixture f;
  constexpr int kTrain = 8640;  // 24 h at 10 s
  std::vector<int> idx(kTrain);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = kTrain - 1; i > 0; --i) std::swap(idx[i], idx[rng.uniform_index(i + 1)]);
  std::vector<bool> is3g(kTrain, false);
  for (int i = 0; i < 60; ++i) is3g[idx[i]] = true;
  for (int i = 0; i < kTrain; ++i) f.train.push_back(baseline_instance(at_s(10.0 * i), is3g[i], rng));

  const double eval0 = 10.0 * kTrain;
  f.epoch_start = at_s(eval0 + 7200.0);
  f.epoch_end = at_s(eval0 + 9000.0);
  for (int i = 0; i < 2160; ++i) {
    const Timestamp ts = at_s(eval0 + 10.0 * i);
    f.eval.push_back(baseline_instance(ts, ts >= f.epoch_start && ts < f.epoch_end, rng));
  }
  return f;
}

namespace {

Instance mining_instance(std::size_t i, bool anomalous, std::string cause, Rng& rng) {
  static const char* kNoise[] = {"w", "x", "y", "z"};
  Instance x;
  x.ts = at_s(static_cast<double>(i));
  x.node_id = "n1";
  x.interface_id = "i1";
  x.values["cause"] = std::move(cause);
  x.values["noise_num"] = rng.normal(0.0, 1.0);
  x.values["noise_cat"] = std::string(kNoise[rng.uniform_index(4)]);
  x.label = anomalous ? Label::kAnomalous : Label::kRegular;
  return x;
}

void shuffle_instances(std::vector<Instance>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_index(i)]);
  for (std::size_t i = 0; i < v.size(); ++i) v[i].ts = at_s(static_cast<double>(i));
}

}  // namespace

LabeledDataset planted_cause(std::uint64_t seed, std::size_t N, std::size_t K) {
  static const char* kOther[] = {"b", "c", "d"};
  Rng rng(seed);
  LabeledDataset d;
  d.features = {"cause", "noise_cat", "noise_num"};
  const std::size_t k_a = K * 9 / 10;
  const std::size_t r_a = (N - K) / 10;
  for (std::size_t i = 0; i < N; ++i) {
    const bool anomalous = i < K;
    const bool planted = anomalous ? i < k_a : i - K < r_a;
    std::string cause = planted ? "a" : kOther[rng.uniform_index(3)];
    d.instances.push_back(mining_instance(i, anomalous, std::move(cause), rng));
  }
  shuffle_instances(d.instances, rng);
  return d;
}

LabeledDataset null_dataset(std::uint64_t seed, std::size_t N, std::size_t K) {
  static const char* kCause[] = {"a", "b", "c", "d"};
  Rng rng(seed);
  LabeledDataset d;
  d.features = {"cause", "noise_cat", "noise_num"};
  for (std::size_t i = 0; i < N; ++i) {
    d.instances.push_back(mining_instance(i, i < K, kCause[rng.uniform_index(4)], rng));
  }
  shuffle_instances(d.instances, rng);
  return d;
}

namespace {

AnomalyRegion fleet_region(const std::string& node, Timestamp start, Timestamp end) {
  AnomalyRegion r;
  r.node_id = node;
  r.interface_id = "i1";
  r.feature = "rtt";
  r.start = start;
  r.end = end;
  r.outliers = {start};
  if (end != start) r.outliers.push_back(end);
  return r;
}

}  // namespace

FleetFixture fleet_fixture(std::uint64_t seed) {
  Rng rng(seed);
  FleetFixture f;
  f.from = t0() - std::chrono::hours(12);
  f.to = t0() + std::chrono::hours(12);
  const int n_buckets = 288;
  const int noon = 144;
  std::vector<int> free;
  for (int b = 0; b < n_buckets; ++b) {
    if (b != noon) free.push_back(b);
  }
  for (std::size_t i = free.size(); i > 1; --i) std::swap(free[i - 1], free[rng.uniform_index(i)]);
  std::size_t next = 0;
  for (int n = 1; n <= 5; ++n) {
    const std::string node = "n" + std::to_string(n);
    auto& list = f.regions[node + "/i1"];
    for (int s = 0; s < 12; ++s) {
      const Timestamp ts = f.from + f.bucket * free[next++] + std::chrono::seconds(rng.uniform_index(300));
      list.push_back(fleet_region(node, ts, ts));
    }
    list.push_back(fleet_region(node, t0(), t0() + std::chrono::seconds(299)));
    std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  }
  return f;
}

FleetFixture random_fleet(std::uint64_t seed) {
  Rng rng(seed);
  FleetFixture f;
  f.from = t0() + std::chrono::seconds(rng.uniform_index(3600));
  f.to = f.from + std::chrono::minutes(30 + rng.uniform_index(24 * 60));
  f.bucket = std::chrono::seconds(60 + rng.uniform_index(900));
  const int interfaces = 1 + static_cast<int>(rng.uniform_index(8));
  const auto span_ns = (f.to - f.from).count();
  for (int n = 0; n < interfaces; ++n) {
    const std::string node = "n" + std::to_string(n);
    auto& list = f.regions[node + "/i1"];
    const int count = static_cast<int>(rng.uniform_index(11));
    for (int i = 0; i < count; ++i) {
      // Some regions start before `from` or run past `to`.
      const auto offset = static_cast<std::int64_t>(rng.uniform(-0.1, 1.1) * span_ns);
      const auto length = static_cast<std::int64_t>(rng.uniform(0.0, 0.1) * span_ns);
      const Timestamp start = f.from + Duration(offset);
      list.push_back(fleet_region(node, start, start + Duration(length)));
    }
  }
  return f;
}

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("mbbminer-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace mbbminer::testing
