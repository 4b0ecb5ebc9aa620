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

#include "mbbminer/rootcause.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "mbbminer/csv.hpp"
#include "mbbminer/error.hpp"
#include "mbbminer/parallel.hpp"
#include "mbbminer/random.hpp"

namespace mbbminer {

std::uint64_t LabeledDataset::anomalous() const {
  std::uint64_t k = 0;
  for (const auto& inst : instances) {
    if (!inst.label) throw Error(ErrorCode::kInvalidArgument, "instance at " + format_timestamp(inst.ts) + " has no label");
    k += *inst.label == Label::kAnomalous;
  }
  return k;
}

std::string subset_label(const Subset& s) {
  std::string out;
  for (const auto& [f, v] : s) {
    if (!out.empty()) out += " & ";
    out += f + "=" + v;
  }
  return out;
}

std::optional<Discretization> parse_discretization(std::string_view s) {
  if (s == "quartile") return Discretization::kQuartile;
  if (s == "none") return Discretization::kNone;
  return std::nullopt;
}

std::string_view discretization_name(Discretization d) {
  return d == Discretization::kQuartile ? "quartile" : "none";
}

namespace {

double lchoose(std::uint64_t a, std::uint64_t b) {
  using boost::math::lgamma;
  return lgamma(static_cast<double>(a) + 1.0) - lgamma(static_cast<double>(b) + 1.0) -
         lgamma(static_cast<double>(a - b) + 1.0);
}

}  // namespace

double hypergeom_log_pmf(std::uint64_t N, std::uint64_t K, std::uint64_t n, std::uint64_t k) {
  if (K > N || n > N) throw Error(ErrorCode::kInvalidCounts, "hypergeometric counts out of range");
  const std::uint64_t lo = n + K > N ? n + K - N : 0;
  const std::uint64_t hi = std::min(n, K);
  if (k < lo || k > hi) return -std::numeric_limits<double>::infinity();
  return lchoose(K, k) + lchoose(N - K, n - k) - lchoose(N, n);
}

double hypergeom_tail(std::uint64_t N, std::uint64_t K, std::uint64_t n, std::uint64_t k) {
  if (!(k <= n && n <= N && k <= K && K <= N)) {
    throw Error(ErrorCode::kInvalidCounts, "need k <= n <= N and k <= K <= N (N=" + std::to_string(N) +
                                               " K=" + std::to_string(K) + " n=" + std::to_string(n) +
                                               " k=" + std::to_string(k) + ")");
  }
  const std::uint64_t lo = n + K > N ? n + K - N : 0;
  const std::uint64_t hi = std::min(n, K);
  if (k <= lo) return 1.0;
  const double Nd = static_cast<double>(N), Kd = static_cast<double>(K), nd = static_cast<double>(n);
  const std::uint64_t mode = static_cast<std::uint64_t>(std::floor((nd + 1.0) * (Kd + 1.0) / (Nd + 2.0)));
  constexpr double kTiny = std::numeric_limits<double>::min();
  double result;
  if (k > mode) {
    // Upper tail terms decrease away from the mode.
    double term = std::exp(hypergeom_log_pmf(N, K, n, k));
    double sum = 0.0;
    for (std::uint64_t x = k; x <= hi; ++x) {
      sum += term;
      if (x == hi || term < sum * 1e-17) break;
      const double xd = static_cast<double>(x);
      term *= (Kd - xd) * (nd - xd) / ((xd + 1.0) * (Nd - Kd - nd + xd + 1.0));
    }
    result = sum;
  } else {
    // 1 - P(X <= k - 1), summing downward from k - 1.
    double term = std::exp(hypergeom_log_pmf(N, K, n, k - 1));
    double sum = 0.0;
    for (std::uint64_t x = k - 1;; --x) {
      sum += term;
      if (x == lo || term < sum * 1e-17) break;
      const double xd = static_cast<double>(x);
      term *= xd * (Nd - Kd - nd + xd) / ((Kd - xd + 1.0) * (nd - xd + 1.0));
    }
    result = 1.0 - sum;
  }
  return std::clamp(result, kTiny, 1.0);
}

std::vector<double> benjamini_hochberg(std::span<const double> p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> q(m);
  double running = 1.0;
  for (std::size_t r = m; r-- > 0;) {
    const std::size_t i = order[r];
    // m / rank >= 1; the max keeps rounding from dropping q below p.
    running = std::min(running, std::max(p[i], p[i] * static_cast<double>(m) / static_cast<double>(r + 1)));
    q[i] = std::min(1.0, running);
  }
  return q;
}

std::vector<std::vector<std::string>> discretize(const LabeledDataset& data, Discretization d) {
  std::vector<std::vector<std::string>> cols;
  cols.reserve(data.features.size());
  for (const auto& f : data.features) {
    std::vector<std::string> col(data.instances.size());
    std::vector<double> nums;
    bool has_text = false;
    for (const auto& inst : data.instances) {
      const FeatureValue& v = inst.value(f);
      if (const auto* x = std::get_if<double>(&v)) nums.push_back(*x);
      else if (std::holds_alternative<std::string>(v)) has_text = true;
    }
    const bool quartile = d == Discretization::kQuartile && !has_text && !nums.empty();
    std::vector<double> cuts;
    if (quartile) {
      std::sort(nums.begin(), nums.end());
      const std::size_t n = nums.size();
      for (std::size_t j = 1; j <= 3; ++j) {
        const std::size_t idx = (j * n + 3) / 4 - 1;  // ceil(j n / 4) - 1
        if (cuts.empty() || nums[idx] != cuts.back()) cuts.push_back(nums[idx]);
      }
    }
    for (std::size_t i = 0; i < data.instances.size(); ++i) {
      const FeatureValue& v = data.instances[i].value(f);
      if (is_null(v)) {
        col[i] = "null";
      } else if (const auto* s = std::get_if<std::string>(&v)) {
        col[i] = *s;
      } else {
        const double x = std::get<double>(v);
        if (!quartile) {
          col[i] = format_double(x);
          continue;
        }
        const auto it = std::lower_bound(cuts.begin(), cuts.end(), x);
        if (it == cuts.begin()) col[i] = "(-inf," + format_double(cuts.front()) + "]";
        else if (it == cuts.end()) col[i] = "(" + format_double(cuts.back()) + ",inf)";
        else col[i] = "(" + format_double(*(it - 1)) + "," + format_double(*it) + "]";
      }
    }
    cols.push_back(std::move(col));
  }
  return cols;
}

namespace {

using Bits = std::vector<std::uint64_t>;

std::uint64_t popcount_and(const Bits& a, const Bits& b) {
  std::uint64_t c = 0;
  for (std::size_t w = 0; w < a.size(); ++w) c += static_cast<std::uint64_t>(std::popcount(a[w] & b[w]));
  return c;
}

std::uint64_t popcount(const Bits& a) {
  std::uint64_t c = 0;
  for (auto w : a) c += static_cast<std::uint64_t>(std::popcount(w));
  return c;
}

struct Item {
  std::size_t feature;
  std::string value;
  Bits bits;
};

void score(EnrichmentRow& row, std::uint64_t N, std::uint64_t K) {
  row.enrichment = (static_cast<double>(row.k) / static_cast<double>(row.n)) /
                   (static_cast<double>(K) / static_cast<double>(N));
  row.p_value = hypergeom_tail(N, K, row.n, row.k);
}

bool row_before(const EnrichmentRow& a, const EnrichmentRow& b) {
  if (a.p_value != b.p_value) return a.p_value < b.p_value;
  if (a.enrichment != b.enrichment) return a.enrichment > b.enrichment;
  if (a.subset.size() != b.subset.size()) return a.subset.size() < b.subset.size();
  return subset_label(a.subset) < subset_label(b.subset);
}

Bits label_bits(const LabeledDataset& data) {
  Bits bits((data.instances.size() + 63) / 64);
  for (std::size_t i = 0; i < data.instances.size(); ++i) {
    if (*data.instances[i].label == Label::kAnomalous) bits[i / 64] |= std::uint64_t{1} << (i % 64);
  }
  return bits;
}

}  // namespace

std::vector<EnrichmentRow> significant_groups(const LabeledDataset& data, const GroupsParams& p) {
  if (p.max_subset_size < 1 || p.max_subset_size > 3) {
    throw Error(ErrorCode::kInvalidArgument, "max_subset_size must be 1, 2 or 3");
  }
  if (p.top_m < 1) throw Error(ErrorCode::kInvalidArgument, "top_m must be >= 1");
  const std::uint64_t N = data.total();
  const std::uint64_t K = data.anomalous();
  if (K == 0) throw Error(ErrorCode::kNoAnomalousInstances, "no instance is labelled anomalous");
  if (K == N) throw Error(ErrorCode::kInvalidCounts, "every instance is labelled anomalous");

  const auto cols = discretize(data, p.discretization);
  const Bits anomalous = label_bits(data);
  const std::size_t words = anomalous.size();

  std::vector<Item> items;
  for (std::size_t f = 0; f < cols.size(); ++f) {
    std::map<std::string, Bits> by_value;
    for (std::size_t i = 0; i < cols[f].size(); ++i) {
      auto& bits = by_value[cols[f][i]];
      if (bits.empty()) bits.resize(words);
      bits[i / 64] |= std::uint64_t{1} << (i % 64);
    }
    for (auto& [value, bits] : by_value) items.push_back({f, value, std::move(bits)});
  }

  auto make_row = [&](const std::vector<std::size_t>& members, const Bits& bits) {
    EnrichmentRow row;
    for (std::size_t m : members) row.subset.emplace_back(data.features[items[m].feature], items[m].value);
    std::sort(row.subset.begin(), row.subset.end());
    row.n = popcount(bits);
    row.k = popcount_and(bits, anomalous);
    return row;
  };

  std::vector<EnrichmentRow> rows(items.size());
  parallel_for(items.size(), p.threads, [&](std::size_t i) {
    rows[i] = make_row({i}, items[i].bits);
    score(rows[i], N, K);
  });

  if (p.max_subset_size >= 2) {
    std::vector<std::size_t> seeds(items.size());
    std::iota(seeds.begin(), seeds.end(), 0);
    std::sort(seeds.begin(), seeds.end(), [&](std::size_t a, std::size_t b) { return row_before(rows[a], rows[b]); });
    seeds.resize(std::min(seeds.size(), static_cast<std::size_t>(p.top_m)));
    std::sort(seeds.begin(), seeds.end());

    std::vector<std::vector<std::size_t>> combos;
    std::vector<std::size_t> cur;
    auto extend = [&](auto&& self, std::size_t from) -> void {
      if (cur.size() >= 2) combos.push_back(cur);
      if (cur.size() == static_cast<std::size_t>(p.max_subset_size)) return;
      for (std::size_t s = from; s < seeds.size(); ++s) {
        const std::size_t it = seeds[s];
        const bool clash = std::any_of(cur.begin(), cur.end(),
                                       [&](std::size_t c) { return items[c].feature == items[it].feature; });
        if (clash) continue;
        cur.push_back(it);
        self(self, s + 1);
        cur.pop_back();
      }
    };
    extend(extend, 0);

    std::vector<EnrichmentRow> multi(combos.size());
    parallel_for(combos.size(), p.threads, [&](std::size_t c) {
      Bits bits = items[combos[c][0]].bits;
      for (std::size_t m = 1; m < combos[c].size(); ++m) {
        const Bits& other = items[combos[c][m]].bits;
        for (std::size_t w = 0; w < words; ++w) bits[w] &= other[w];
      }
      multi[c] = make_row(combos[c], bits);
      if (multi[c].n > 0) score(multi[c], N, K);
    });
    for (auto& row : multi) {
      if (row.n > 0) rows.push_back(std::move(row));
    }
  }

  std::vector<double> pv(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) pv[i] = rows[i].p_value;
  const auto q = benjamini_hochberg(pv);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].q_value = q[i];
  std::sort(rows.begin(), rows.end(), row_before);
  return rows;
}

double permutation_test(const LabeledDataset& data, const Subset& subset, int R, std::uint64_t seed,
                        Discretization d, int threads) {
  if (R < 1) throw Error(ErrorCode::kInvalidR, "R must be >= 1");
  const std::uint64_t N = data.total();
  const std::uint64_t K = data.anomalous();
  if (K == 0) throw Error(ErrorCode::kNoAnomalousInstances, "no instance is labelled anomalous");

  const auto cols = discretize(data, d);
  std::vector<char> match(N, 1);
  for (const auto& [feature, value] : subset) {
    const auto it = std::find(data.features.begin(), data.features.end(), feature);
    if (it == data.features.end()) throw Error(ErrorCode::kUnknownKey, "unknown feature '" + feature + "'");
    const auto& col = cols[static_cast<std::size_t>(it - data.features.begin())];
    for (std::size_t i = 0; i < N; ++i) match[i] = match[i] && col[i] == value;
  }
  std::vector<std::size_t> matched;
  for (std::size_t i = 0; i < N; ++i) {
    if (match[i]) matched.push_back(i);
  }
  if (matched.empty()) throw Error(ErrorCode::kInvalidArgument, "subset '" + subset_label(subset) + "' matches no instance");

  std::vector<char> labels(N);
  for (std::size_t i = 0; i < N; ++i) labels[i] = *data.instances[i].label == Label::kAnomalous;
  auto count = [&](const std::vector<char>& l) {
    std::uint64_t k = 0;
    for (std::size_t i : matched) k += static_cast<std::uint64_t>(l[i]);
    return k;
  };
  // n, K and N are fixed under permutation, so comparing k orders the
  // enrichment statistic exactly.
  const std::uint64_t observed = count(labels);
  std::vector<char> hit(static_cast<std::size_t>(R));
  parallel_for(static_cast<std::size_t>(R), threads, [&](std::size_t r) {
    Rng rng(mix_seed(seed, r));
    std::vector<char> l = labels;
    for (std::size_t i = N; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.uniform_index(i));
      std::swap(l[i - 1], l[j]);
    }
    hit[r] = count(l) >= observed;
  });
  const auto ge = static_cast<double>(std::count(hit.begin(), hit.end(), 1));
  return (1.0 + ge) / (static_cast<double>(R) + 1.0);
}

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw Error(ErrorCode::kInsufficientData, "t-test needs at least 2 values per group");
  }
  auto moments = [](std::span<const double> x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::pair{mean, ss / static_cast<double>(x.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  TTestResult r;
  if (va == 0.0 && vb == 0.0) {
    r.df = na + nb - 2.0;
    if (ma == mb) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      r.p = 0.0;
    }
    return r;
  }
  const double sa = va / na, sb = vb / nb;
  r.t = (ma - mb) / std::sqrt(sa + sb);
  r.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  boost::math::students_t dist(r.df);
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

TTestResult welch_t_test(const LabeledDataset& data, const std::string& feature) {
  std::vector<double> a, b;
  for (const auto& inst : data.instances) {
    if (!inst.label) throw Error(ErrorCode::kInvalidArgument, "instance without label");
    const auto* v = std::get_if<double>(&inst.value(feature));
    if (!v) continue;
    (*inst.label == Label::kAnomalous ? a : b).push_back(*v);
  }
  return welch_t_test(a, b);
}

}  // namespace mbbminer
