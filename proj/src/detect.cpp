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

#include "mbbminer/detect.hpp"

#include <algorithm>
#include <cmath>

#include "mbbminer/csv.hpp"
#include "mbbminer/error.hpp"
#include "mbbminer/kde.hpp"
#include "mbbminer/parallel.hpp"

namespace mbbminer {

std::string_view detector_name(Detector d) {
  switch (d) {
    case Detector::kRolling: return "rolling";
    case Detector::kBaseline: return "baseline";
    case Detector::kDistribution: return "distribution";
  }
  return "rolling";
}

std::optional<Detector> parse_detector(std::string_view s) {
  if (s == "rolling") return Detector::kRolling;
  if (s == "baseline") return Detector::kBaseline;
  if (s == "distribution") return Detector::kDistribution;
  return std::nullopt;
}

std::string_view direction_name(Direction d) {
  switch (d) {
    case Direction::kAbove: return "above";
    case Direction::kBelow: return "below";
    case Direction::kShift: return "shift";
  }
  return "above";
}

std::optional<Direction> parse_direction(std::string_view s) {
  if (s == "above") return Direction::kAbove;
  if (s == "below") return Direction::kBelow;
  if (s == "shift") return Direction::kShift;
  return std::nullopt;
}

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, msg);
}

bool in_unit_interval(double q) { return q > 0.0 && q < 1.0; }

}  // namespace

void RollingParams::validate() const {
  require(window > Duration::zero(), "window must be positive");
  require(k_sigma > 0.0, "k_sigma must be positive");
  require(min_cluster >= 1, "min_cluster must be >= 1");
  require(max_gap > Duration::zero(), "max_gap must be positive");
  require(sigma_floor >= 0.0, "sigma_floor must be >= 0");
}

ParamSnapshot RollingParams::snapshot() const {
  return {{"window", format_duration(window)},
          {"k_sigma", format_double(k_sigma)},
          {"min_cluster", std::to_string(min_cluster)},
          {"max_gap", format_duration(max_gap)},
          {"sigma_floor", format_double(sigma_floor)}};
}

void BaselineParams::validate() const {
  require(!features.empty(), "baseline needs at least one context feature");
  require(!quantile || in_unit_interval(*quantile), "quantile must lie in (0, 1)");
  require(in_unit_interval(residual_quantile), "residual_quantile must lie in (0, 1)");
  require(min_cluster >= 1, "min_cluster must be >= 1");
  require(max_gap > Duration::zero(), "max_gap must be positive");
}

double BaselineParams::effective_quantile(Orientation o) const {
  if (quantile) return *quantile;
  return o == Orientation::kLowerIsBetter ? 0.10 : 0.90;
}

ParamSnapshot BaselineParams::snapshot(Orientation o) const {
  std::string feats;
  for (const auto& f : features) feats += (feats.empty() ? "" : ",") + f;
  return {{"features", feats},
          {"quantile", format_double(effective_quantile(o))},
          {"residual_quantile", format_double(residual_quantile)},
          {"min_cluster", std::to_string(min_cluster)},
          {"max_gap", format_duration(max_gap)},
          {"n_trees", std::to_string(forest.n_trees)},
          {"min_leaf", std::to_string(forest.min_leaf)},
          {"seed", std::to_string(forest.seed)}};
}

void DistParams::validate() const {
  require(segment > Duration::zero(), "segment must be positive");
  require(kl_threshold >= 0.0, "kl_threshold must be >= 0");
  require(grid_points >= 16, "grid_points must be >= 16");
  require(density_floor > 0.0, "density_floor must be positive");
}

ParamSnapshot DistParams::snapshot() const {
  return {{"segment", format_duration(segment)},
          {"kl_threshold", format_double(kl_threshold)},
          {"grid_points", std::to_string(grid_points)},
          {"density_floor", format_double(density_floor)}};
}

std::vector<Point> numeric_points(std::span<const Instance> instances, const std::string& feature) {
  std::vector<Point> out;
  for (const auto& inst : instances) {
    if (const auto* v = std::get_if<double>(&inst.value(feature))) out.push_back({inst.ts, *v});
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> cluster_outliers(std::span<const Timestamp> outliers,
                                                                  Duration max_gap, int min_cluster) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t first = 0;
  for (std::size_t i = 0; i < outliers.size(); ++i) {
    const bool last = i + 1 == outliers.size() || outliers[i + 1] - outliers[i] > max_gap;
    if (!last) continue;
    if (i - first + 1 >= static_cast<std::size_t>(min_cluster)) out.emplace_back(first, i);
    first = i + 1;
  }
  return out;
}

namespace {

void check_sorted(std::span<const Point> series) {
  for (std::size_t i = 1; i < series.size(); ++i) {
    if (series[i].ts < series[i - 1].ts) throw Error(ErrorCode::kUnsortedInput, "series is not sorted by time");
  }
}

struct Flagged {
  Timestamp ts;
  double z;  // signed deviation in detector units
};

std::vector<AnomalyRegion> build_regions(const std::vector<Flagged>& flagged, Duration max_gap,
                                         int min_cluster, Detector detector, const ParamSnapshot& params,
                                         std::optional<Direction> fixed_direction) {
  std::vector<Timestamp> ts;
  ts.reserve(flagged.size());
  for (const auto& f : flagged) ts.push_back(f.ts);
  std::vector<AnomalyRegion> out;
  for (const auto& [a, b] : cluster_outliers(ts, max_gap, min_cluster)) {
    AnomalyRegion r;
    r.start = ts[a];
    r.end = ts[b];
    r.detector = detector;
    r.params = params;
    r.outliers.assign(ts.begin() + static_cast<std::ptrdiff_t>(a), ts.begin() + static_cast<std::ptrdiff_t>(b) + 1);
    double abs_sum = 0.0, signed_sum = 0.0;
    for (std::size_t i = a; i <= b; ++i) {
      abs_sum += std::abs(flagged[i].z);
      signed_sum += flagged[i].z;
    }
    const double m = static_cast<double>(b - a + 1);
    r.score = abs_sum / m;
    r.direction = fixed_direction.value_or(signed_sum >= 0.0 ? Direction::kAbove : Direction::kBelow);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::vector<AnomalyRegion> detect_rolling(std::span<const Point> series, const RollingParams& p) {
  p.validate();
  if (series.size() < 3) {
    throw Error(ErrorCode::kTooFewPoints, "rolling detection needs at least 3 points, got " +
                                              std::to_string(series.size()));
  }
  check_sorted(series);
  for (const auto& pt : series) {
    if (!std::isfinite(pt.value)) throw Error(ErrorCode::kInvalidArgument, "series has a non-finite value");
  }

  // Window [lo, hi) holds points with ts in (t - W, t). Sums are of
  // deviations from an anchor value to limit cancellation.
  std::vector<Flagged> flagged;
  std::size_t lo = 0, hi = 0;
  long double anchor = 0, s = 0, ss = 0;
  for (const auto& pt : series) {
    const Timestamp t = pt.ts;
    while (hi < series.size() && series[hi].ts < t) {
      if (lo == hi) {
        anchor = series[hi].value;
        s = ss = 0;
      }
      const long double d = series[hi].value - anchor;
      s += d;
      ss += d * d;
      ++hi;
    }
    while (lo < hi && series[lo].ts <= t - p.window) {
      const long double d = series[lo].value - anchor;
      s -= d;
      ss -= d * d;
      ++lo;
    }
    const std::size_t m = hi - lo;
    if (m < 2) continue;
    const long double mean = s / m;
    const long double var = std::max<long double>(0, (ss - s * mean) / (m - 1));
    const long double sigma = std::max<long double>(std::sqrt(var), p.sigma_floor);
    const long double dev = (pt.value - anchor) - mean;
    if (std::abs(dev) > p.k_sigma * sigma) flagged.push_back({t, static_cast<double>(dev / sigma)});
  }
  return build_regions(flagged, p.max_gap, p.min_cluster, Detector::kRolling, p.snapshot(), std::nullopt);
}

BaselineResult detect_baseline(std::span<const Instance> train, std::span<const Instance> eval,
                               const std::string& target, Orientation orientation,
                               const BaselineParams& p) {
  p.validate();
  if (train.empty()) throw Error(ErrorCode::kInsufficientData, "training set is empty");
  const double q = p.effective_quantile(orientation);
  const double sign = orientation == Orientation::kLowerIsBetter ? 1.0 : -1.0;

  BaselineResult result;
  auto model = std::make_shared<QrfModel>(fit_qrf(train, target, p.features, p.forest));
  result.model = model;

  auto usable = [&](const Instance& inst) {
    if (!is_numeric(inst.value(target))) return false;
    for (const auto& f : p.features) {
      if (is_null(inst.value(f))) return false;
    }
    return true;
  };
  auto residuals_of = [&](std::span<const Instance> set, std::vector<const Instance*>& kept) {
    for (const auto& inst : set) {
      if (usable(inst)) kept.push_back(&inst);
    }
    std::vector<double> base(kept.size());
    parallel_for(kept.size(), p.forest.threads,
                 [&](std::size_t i) { base[i] = predict_quantile(*model, *kept[i], q); });
    return base;
  };

  std::vector<const Instance*> train_kept;
  const auto train_base = residuals_of(train, train_kept);
  if (train_kept.empty()) throw Error(ErrorCode::kInsufficientData, "no training instance has full context");
  std::vector<double> train_res(train_kept.size());
  for (std::size_t i = 0; i < train_kept.size(); ++i) {
    train_res[i] = sign * (std::get<double>(train_kept[i]->value(target)) - train_base[i]);
  }
  std::sort(train_res.begin(), train_res.end());
  // Lower empirical quantile: the ceil(q n)-th order statistic.
  const double pos = std::ceil(p.residual_quantile * static_cast<double>(train_res.size()));
  const std::size_t idx = static_cast<std::size_t>(std::clamp(pos, 1.0, static_cast<double>(train_res.size()))) - 1;
  const double tau = train_res[idx];
  result.threshold = tau;

  const bool constant_target = (model->targets.array() == model->targets(0)).all();
  const bool degenerate = constant_target && tau == 0.0;
  if (degenerate) {
    result.warnings.push_back("degenerate training: all targets are identical and the residual threshold is 0");
  }

  std::vector<const Instance*> eval_kept;
  for (const auto& inst : eval) {
    if (!usable(inst)) result.skipped.push_back(inst.ts);
  }
  const auto eval_base = residuals_of(eval, eval_kept);
  std::vector<Flagged> flagged;
  for (std::size_t i = 0; i < eval_kept.size(); ++i) {
    const Instance& inst = *eval_kept[i];
    const double r = sign * (std::get<double>(inst.value(target)) - eval_base[i]);
    result.baseline.push_back({inst.ts, eval_base[i]});
    result.residuals.push_back({inst.ts, r});
    if (!degenerate && r > tau) flagged.push_back({inst.ts, r - tau});
  }
  std::sort(flagged.begin(), flagged.end(), [](const Flagged& a, const Flagged& b) { return a.ts < b.ts; });
  if (!result.skipped.empty()) {
    result.warnings.push_back(std::to_string(result.skipped.size()) +
                              " eval instances skipped for a Null target or context value");
  }
  result.regions = build_regions(flagged, p.max_gap, p.min_cluster, Detector::kBaseline,
                                 p.snapshot(orientation),
                                 sign > 0 ? Direction::kAbove : Direction::kBelow);
  return result;
}

double kde_kl(std::span<const double> p_sample, std::span<const double> q_sample, const DistParams& p) {
  p.validate();
  if (p_sample.size() < 2 || q_sample.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "KDE needs at least 2 points per sample");
  }
  using Vec = VectorX<double>;
  const Eigen::Map<const Vec> a(p_sample.data(), static_cast<Eigen::Index>(p_sample.size()));
  const Eigen::Map<const Vec> b(q_sample.data(), static_cast<Eigen::Index>(q_sample.size()));
  const double ha = silverman_bandwidth<double>(a);
  const double hb = silverman_bandwidth<double>(b);
  const double pad = 3.0 * std::max(ha, hb);
  const double lo = std::min(a.minCoeff(), b.minCoeff()) - pad;
  const double hi = std::max(a.maxCoeff(), b.maxCoeff()) + pad;
  const Vec grid = Vec::LinSpaced(p.grid_points, lo, hi);
  const double dx = (hi - lo) / static_cast<double>(p.grid_points - 1);
  const Vec pd = floor_normalize<double>(kde_on_grid<double>(a, ha, grid), dx, p.density_floor);
  const Vec qd = floor_normalize<double>(kde_on_grid<double>(b, hb, grid), dx, p.density_floor);
  return kl_divergence<double>(pd, qd, dx);
}

DistResult detect_distribution(std::span<const Point> series, const DistParams& p) {
  p.validate();
  check_sorted(series);
  DistResult out;
  if (series.empty()) return out;
  const Timestamp t0 = series.front().ts;
  const std::int64_t nseg = (series.back().ts - t0) / p.segment + 1;
  std::vector<std::vector<const Point*>> segs(static_cast<std::size_t>(nseg));
  for (const auto& pt : series) segs[static_cast<std::size_t>((pt.ts - t0) / p.segment)].push_back(&pt);
  constexpr std::size_t kMinSegment = 10;
  for (std::size_t k = 0; k + 1 < segs.size(); ++k) {
    SegmentPair pair;
    pair.first_start = t0 + p.segment * static_cast<std::int64_t>(k);
    pair.second_start = pair.first_start + p.segment;
    pair.n_first = segs[k].size();
    pair.n_second = segs[k + 1].size();
    if (pair.n_first < kMinSegment || pair.n_second < kMinSegment) {
      out.skipped.push_back(pair);
      continue;
    }
    std::vector<double> prev, cur;
    for (const auto* pt : segs[k]) prev.push_back(pt->value);
    for (const auto* pt : segs[k + 1]) cur.push_back(pt->value);
    // P is the current segment, Q the one before it.
    pair.kl = kde_kl(cur, prev, p);
    pair.flagged = pair.kl > p.kl_threshold;
    out.pairs.push_back(pair);
    if (pair.flagged) {
      AnomalyRegion r;
      r.start = segs[k + 1].front()->ts;
      r.end = segs[k + 1].back()->ts;
      r.detector = Detector::kDistribution;
      r.params = p.snapshot();
      r.score = pair.kl;
      r.direction = Direction::kShift;
      out.regions.push_back(std::move(r));
    }
  }
  return out;
}

FleetResult fleet_count(const std::map<std::string, std::vector<AnomalyRegion>>& regions_by_interface,
                        Timestamp from, Timestamp to, Duration bucket, double flag_sigma) {
  if (bucket <= Duration::zero()) throw Error(ErrorCode::kInvalidArgument, "bucket must be positive");
  FleetResult out;
  if (to <= from) return out;
  const std::int64_t span = (to - from).count();
  const std::int64_t b = bucket.count();
  const std::size_t nb = static_cast<std::size_t>(span / b + (span % b != 0 ? 1 : 0));
  out.buckets.resize(nb);
  for (std::size_t i = 0; i < nb; ++i) out.buckets[i].start = from + bucket * static_cast<std::int64_t>(i);
  std::vector<char> seen(nb);
  for (const auto& [iface, regions] : regions_by_interface) {
    std::fill(seen.begin(), seen.end(), 0);
    for (const auto& r : regions) {
      if (r.end < from || r.start >= to) continue;
      const std::size_t first = r.start <= from ? 0 : static_cast<std::size_t>((r.start - from).count() / b);
      const std::size_t last = std::min(nb - 1, static_cast<std::size_t>((r.end - from).count() / b));
      for (std::size_t i = first; i <= last; ++i) seen[i] = 1;
    }
    for (std::size_t i = 0; i < nb; ++i) out.buckets[i].count += seen[i];
  }
  double sum = 0.0, sumsq = 0.0;
  for (const auto& fb : out.buckets) {
    sum += fb.count;
    sumsq += static_cast<double>(fb.count) * fb.count;
  }
  const double n = static_cast<double>(nb);
  out.mean = sum / n;
  out.sd = std::sqrt(std::max(0.0, sumsq / n - out.mean * out.mean));
  out.threshold = out.mean + flag_sigma * out.sd;
  for (auto& fb : out.buckets) fb.flagged = fb.count > out.threshold;
  return out;
}

void label_instances(std::span<Instance> instances, std::span<const AnomalyRegion> regions) {
  for (auto& inst : instances) {
    bool hit = false;
    for (const auto& r : regions) {
      if (!r.node_id.empty() && r.node_id != inst.node_id) continue;
      if (!r.interface_id.empty() && r.interface_id != inst.interface_id) continue;
      if (inst.ts >= r.start && inst.ts <= r.end) {
        hit = true;
        break;
      }
    }
    inst.label = hit ? Label::kAnomalous : Label::kRegular;
  }
}

}  // namespace mbbminer
