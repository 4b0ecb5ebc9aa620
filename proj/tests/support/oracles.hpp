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

// Reference computations written independently of the library: brute-force
// scans, exact rational arithmetic and numerical integration.

#ifndef MBBMINER_TESTS_ORACLES_HPP
#define MBBMINER_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "mbbminer/bucket.hpp"
#include "mbbminer/detect.hpp"

namespace mbbminer::oracle {

using BigFloat = boost::multiprecision::cpp_bin_float_100;

// Pascal's triangle; exact in 64 bits up to n = 66.
class Binomials {
 public:
  explicit Binomials(unsigned max_n) : rows_(max_n + 1) {
    for (unsigned n = 0; n <= max_n; ++n) {
      rows_[n].assign(n + 1, 1);
      for (unsigned k = 1; k < n; ++k) rows_[n][k] = rows_[n - 1][k - 1] + rows_[n - 1][k];
    }
  }
  std::uint64_t operator()(unsigned n, unsigned k) const { return k > n ? 0 : rows_[n][k]; }

 private:
  std::vector<std::vector<std::uint64_t>> rows_;
};

// Hypergeometric pmf over k = 0..n as exact numerators over C(N, n); with
// N <= 60 every count stays below 2^60.
inline std::vector<std::uint64_t> hypergeom_numerators(const Binomials& C, unsigned N, unsigned K, unsigned n) {
  std::vector<std::uint64_t> out(n + 1, 0);
  for (unsigned k = 0; k <= n; ++k) {
    if (k <= K && n - k <= N - K) out[k] = C(K, k) * C(N - K, n - k);
  }
  return out;
}

inline double ratio(std::uint64_t num, std::uint64_t den) {
  return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den));
}

// Smallest order statistic whose empirical CDF i/n reaches num/den.
inline double empirical_quantile(std::vector<double> v, std::int64_t num, std::int64_t den) {
  std::sort(v.begin(), v.end());
  const auto n = static_cast<std::int64_t>(v.size());
  std::int64_t i = (num * n + den - 1) / den;
  if (i < 1) i = 1;
  return v[static_cast<std::size_t>(i - 1)];
}

// Mean and sample sd of the points strictly inside (t - W, t), two-pass.
struct WindowStats {
  std::size_t n = 0;
  long double mean = 0;
  long double sd = 0;
};

inline WindowStats trailing_stats(std::span<const Point> s, std::size_t i, Duration W) {
  WindowStats w;
  std::vector<long double> vals;
  for (std::size_t j = 0; j < i; ++j) {
    if (s[j].ts < s[i].ts && s[j].ts > s[i].ts - W) vals.push_back(s[j].value);
  }
  w.n = vals.size();
  if (w.n < 2) return w;
  long double sum = 0;
  for (auto v : vals) sum += v;
  w.mean = sum / w.n;
  long double ss = 0;
  for (auto v : vals) ss += (v - w.mean) * (v - w.mean);
  w.sd = std::sqrt(ss / (w.n - 1));
  return w;
}

// Signed normalized deviation, or nullopt when the window is too thin.
inline std::optional<long double> rolling_z(std::span<const Point> s, std::size_t i, const RollingParams& p) {
  const WindowStats w = trailing_stats(s, i, p.window);
  if (w.n < 2) return std::nullopt;
  const long double scale = std::max<long double>(w.sd, p.sigma_floor);
  return (s[i].value - w.mean) / scale;
}

// Outlier flags by direct recomputation at every point.
inline std::vector<bool> rolling_outliers(std::span<const Point> s, const RollingParams& p) {
  std::vector<bool> out(s.size(), false);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto z = rolling_z(s, i, p);
    out[i] = z && std::fabs(*z) > p.k_sigma;
  }
  return out;
}

// Regions as [first, last] outlier timestamps of qualifying gap clusters.
inline std::vector<std::pair<Timestamp, Timestamp>> cluster_spans(const std::vector<Timestamp>& ts, Duration max_gap,
                                                                  int min_cluster) {
  std::vector<std::pair<Timestamp, Timestamp>> out;
  std::size_t i = 0;
  while (i < ts.size()) {
    std::size_t j = i;
    while (j + 1 < ts.size() && ts[j + 1] - ts[j] <= max_gap) ++j;
    if (static_cast<int>(j - i + 1) >= min_cluster) out.emplace_back(ts[i], ts[j]);
    i = j + 1;
  }
  return out;
}

// Exact sum of doubles rounded once.
inline double exact_sum(std::span<const double> v) {
  BigFloat s = 0;
  for (double x : v) s += x;
  return static_cast<double>(s);
}

// Mean of numeric observations in [t - width, t): exact sum over the count.
inline std::optional<double> window_mean(std::span<const Observation> obs, Timestamp t, Duration width) {
  std::vector<double> vals;
  for (const auto& o : obs) {
    if (o.ts >= t - width && o.ts < t && std::holds_alternative<double>(o.value)) {
      vals.push_back(std::get<double>(o.value));
    }
  }
  if (vals.empty()) return std::nullopt;
  return exact_sum(vals) / static_cast<double>(vals.size());
}

// Interfaces whose closed region span overlaps each bucket [from + iB, from + (i+1)B) ∩ [from, to).
inline std::vector<int> fleet_counts(const std::map<std::string, std::vector<AnomalyRegion>>& regions,
                                     Timestamp from, Timestamp to, Duration B) {
  std::vector<int> counts;
  for (Timestamp b = from; b < to; b += B) {
    const Timestamp e = std::min(b + B, to);
    int c = 0;
    for (const auto& [_, list] : regions) {
      bool hit = false;
      for (const auto& r : list) hit = hit || (r.start < e && r.end >= b);
      c += hit ? 1 : 0;
    }
    counts.push_back(c);
  }
  return counts;
}

// Finest ladder level with span/level <= max_points, else the coarsest.
inline Duration ladder_level(const std::vector<Duration>& levels, Duration span, std::int64_t max_points) {
  for (auto level : levels) {
    if (static_cast<__int128>(span.count()) <= static_cast<__int128>(max_points) * level.count()) return level;
  }
  return levels.back();
}

// Two-sided Student t p-value by composite Simpson integration of the density.
inline double t_two_sided_p(double t, double df, int panels = 200000) {
  const double a = std::fabs(t);
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * std::numbers::pi);
  auto pdf = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
  const double h = a / panels;
  double s = pdf(0) + pdf(a);
  for (int i = 1; i < panels; ++i) s += pdf(i * h) * (i % 2 ? 4 : 2);
  const double central = s * h / 3;
  return std::clamp(1.0 - 2.0 * central, 0.0, 1.0);
}

// KL(N(m1, s1^2) || N(m2, s2^2)).
inline double gaussian_kl(double m1, double s1, double m2, double s2) {
  return std::log(s2 / s1) + (s1 * s1 + (m1 - m2) * (m1 - m2)) / (2 * s2 * s2) - 0.5;
}

}  // namespace mbbminer::oracle

#endif  // MBBMINER_TESTS_ORACLES_HPP
