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

#ifndef MBBMINER_DETECT_HPP
#define MBBMINER_DETECT_HPP

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mbbminer/merge.hpp"
#include "mbbminer/qrf.hpp"
#include "mbbminer/schema.hpp"
#include "mbbminer/time.hpp"

namespace mbbminer {

struct Point {
  Timestamp ts;
  double value = 0.0;
  bool operator==(const Point&) const = default;
};

enum class Detector { kRolling, kBaseline, kDistribution };
enum class Direction { kAbove, kBelow, kShift };

std::string_view detector_name(Detector d);
std::optional<Detector> parse_detector(std::string_view s);
std::string_view direction_name(Direction d);
std::optional<Direction> parse_direction(std::string_view s);

using ParamSnapshot = std::map<std::string, std::string>;

struct AnomalyRegion {
  std::string node_id;
  std::string interface_id;
  std::string feature;
  Timestamp start;
  Timestamp end;  // inclusive
  Detector detector = Detector::kRolling;
  ParamSnapshot params;
  std::vector<Timestamp> outliers;
  double score = 0.0;
  Direction direction = Direction::kAbove;

  bool operator==(const AnomalyRegion&) const = default;
};

struct RollingParams {
  Duration window = std::chrono::minutes(5);
  double k_sigma = 3.0;
  int min_cluster = 5;
  Duration max_gap = std::chrono::seconds(60);
  double sigma_floor = 1e-9;

  void validate() const;
  ParamSnapshot snapshot() const;
};

struct BaselineParams {
  std::vector<std::string> features;
  // Defaults to 0.10 for lower-is-better targets and 0.90 otherwise.
  std::optional<double> quantile;
  double residual_quantile = 0.99;
  int min_cluster = 5;
  Duration max_gap = std::chrono::seconds(60);
  ForestParams forest;

  void validate() const;
  double effective_quantile(Orientation o) const;
  ParamSnapshot snapshot(Orientation o) const;
};

struct DistParams {
  Duration segment = std::chrono::minutes(15);
  double kl_threshold = 0.5;
  int grid_points = 512;
  double density_floor = 1e-12;

  void validate() const;
  ParamSnapshot snapshot() const;
};

// Numeric values of `feature`, Nulls dropped.
std::vector<Point> numeric_points(std::span<const Instance> instances, const std::string& feature);

// Groups time-sorted outliers into clusters (gap <= max_gap) and returns the
// index ranges [first, last] of clusters with at least min_cluster members.
std::vector<std::pair<std::size_t, std::size_t>> cluster_outliers(std::span<const Timestamp> outliers,
                                                                  Duration max_gap, int min_cluster);

// Trailing-window z-score detector. The window (t - W, t) excludes the point
// itself and needs >= 2 points; sigma is the sample standard deviation.
// Throws Error(kTooFewPoints) for fewer than 3 points and
// Error(kUnsortedInput) for unsorted input.
std::vector<AnomalyRegion> detect_rolling(std::span<const Point> series, const RollingParams& p);

struct BaselineResult {
  std::vector<AnomalyRegion> regions;
  std::vector<Point> baseline;
  std::vector<Point> residuals;
  // Eval instances with a Null target or context feature.
  std::vector<Timestamp> skipped;
  std::vector<std::string> warnings;
  double threshold = 0.0;
  std::shared_ptr<const QrfModel> model;
};

// Quantile-forest baseline detector; the residual is signed so that positive
// means "worse than baseline" for the target's orientation.
BaselineResult detect_baseline(std::span<const Instance> train, std::span<const Instance> eval,
                               const std::string& target, Orientation orientation,
                               const BaselineParams& p);

struct SegmentPair {
  Timestamp first_start;
  Timestamp second_start;
  std::size_t n_first = 0;
  std::size_t n_second = 0;
  double kl = 0.0;
  bool flagged = false;
  bool operator==(const SegmentPair&) const = default;
};

struct DistResult {
  std::vector<SegmentPair> pairs;
  // Pairs with a segment of fewer than 10 points.
  std::vector<SegmentPair> skipped;
  // One "shift" region per flagged pair, spanning the second segment's points.
  std::vector<AnomalyRegion> regions;
};

// KL(P || Q) between KDE fits of two samples on a shared grid.
double kde_kl(std::span<const double> p_sample, std::span<const double> q_sample, const DistParams& p);

DistResult detect_distribution(std::span<const Point> series, const DistParams& p);

struct FleetBucket {
  Timestamp start;
  int count = 0;
  bool flagged = false;
  bool operator==(const FleetBucket&) const = default;
};

struct FleetResult {
  std::vector<FleetBucket> buckets;
  double mean = 0.0;
  double sd = 0.0;
  double threshold = 0.0;
};

// Buckets [from + i*B, from + (i+1)*B) covering [from, to). A region counts
// for a bucket when its closed span overlaps it; each interface counts once.
// Flag rule: count > mean + flag_sigma * sd (population sd over buckets).
FleetResult fleet_count(const std::map<std::string, std::vector<AnomalyRegion>>& regions_by_interface,
                        Timestamp from, Timestamp to, Duration bucket, double flag_sigma = 2.0);

// Labels each instance anomalous when its ts falls inside a region of the
// same node/interface (empty region ids match any), regular otherwise.
void label_instances(std::span<Instance> instances, std::span<const AnomalyRegion> regions);

}  // namespace mbbminer

#endif  // MBBMINER_DETECT_HPP
