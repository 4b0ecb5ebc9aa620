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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "fixtures.hpp"
#include "mbbminer/error.hpp"
#include "mbbminer/random.hpp"
#include "mbbminer/rootcause.hpp"
#include "oracles.hpp"

namespace mbbminer {
namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kTimeout;
}

TEST(Hypergeom, WorkedExample) {
  EXPECT_NEAR(hypergeom_tail(20, 5, 8, 4), 7280.0 / 125970.0, 1e-15);
  EXPECT_EQ(hypergeom_tail(20, 5, 8, 0), 1.0);
  EXPECT_NEAR(std::exp(hypergeom_log_pmf(20, 5, 8, 5)), 455.0 / 125970.0, 1e-15);
  EXPECT_EQ(hypergeom_log_pmf(20, 5, 8, 6), -std::numeric_limits<double>::infinity());
}

TEST(Hypergeom, TailIsNonIncreasingAndInUnitInterval) {
  Rng rng(1);
  for (int rep = 0; rep < 300; ++rep) {
    const std::uint64_t N = 1 + rng.uniform_index(5000);
    const std::uint64_t K = rng.uniform_index(N + 1);
    const std::uint64_t n = rng.uniform_index(N + 1);
    double prev = 2.0;
    for (std::uint64_t k = 0; k <= std::min(n, K); ++k) {
      const double t = hypergeom_tail(N, K, n, k);
      EXPECT_GT(t, 0.0);
      EXPECT_LE(t, 1.0);
      EXPECT_LE(t, prev);
      prev = t;
    }
  }
}

TEST(Hypergeom, LargePopulations) {
  const double t = hypergeom_tail(10'000'000, 100'000, 50'000, 5'000);
  EXPECT_GT(t, 0.0);
  EXPECT_LT(t, 1e-300);
  const double mid = hypergeom_tail(10'000'000, 5'000'000, 1000, 500);
  EXPECT_NEAR(mid, 0.5 + 0.5 * std::exp(hypergeom_log_pmf(10'000'000, 5'000'000, 1000, 500)), 1e-6);
}

TEST(Hypergeom, InvalidCounts) {
  EXPECT_EQ(code_of([] { hypergeom_tail(10, 5, 11, 1); }), ErrorCode::kInvalidCounts);
  EXPECT_EQ(code_of([] { hypergeom_tail(10, 11, 5, 1); }), ErrorCode::kInvalidCounts);
  EXPECT_EQ(code_of([] { hypergeom_tail(10, 5, 3, 4); }), ErrorCode::kInvalidCounts);
}

TEST(Bh, WorkedExample) {
  const std::vector<double> p{0.01, 0.04, 0.03, 0.2};
  const auto q = benjamini_hochberg(p);
  ASSERT_EQ(q.size(), 4u);
  EXPECT_NEAR(q[0], 0.04, 1e-15);
  EXPECT_NEAR(q[1], 0.04 * 4 / 3, 1e-15);
  EXPECT_NEAR(q[2], 0.04 * 4 / 3, 1e-15);
  EXPECT_NEAR(q[3], 0.2, 1e-15);
  EXPECT_TRUE(benjamini_hochberg({}).empty());
}

TEST(Bh, MatchesDefinitionAndProperties) {
  Rng rng(2);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t m = 1 + rng.uniform_index(60);
    std::vector<double> p(m);
    for (auto& x : p) x = rng.uniform() < 0.2 ? rng.uniform() * 1e-4 : rng.uniform();
    const auto q = benjamini_hochberg(p);
    auto sorted = p;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < m; ++i) {
      // q_i = min over p_j >= p_i of p_j m / rank(p_j), capped at 1.
      double want = 1.0;
      for (std::size_t r = 0; r < m; ++r) {
        if (sorted[r] >= p[i]) want = std::min(want, sorted[r] * static_cast<double>(m) / static_cast<double>(r + 1));
      }
      EXPECT_NEAR(q[i], want, 1e-15);
      EXPECT_GE(q[i], p[i]);
      EXPECT_LE(q[i], 1.0);
      for (std::size_t j = 0; j < m; ++j) {
        if (p[i] < p[j]) EXPECT_LE(q[i], q[j]);
      }
    }
  }
}

Instance labelled(std::map<std::string, FeatureValue> values, bool anomalous) {
  Instance x;
  x.values = std::move(values);
  x.label = anomalous ? Label::kAnomalous : Label::kRegular;
  return x;
}

TEST(Discretize, QuartileCutsAndNull) {
  LabeledDataset d;
  d.features = {"v"};
  for (int i = 1; i <= 8; ++i) d.instances.push_back(labelled({{"v", static_cast<double>(i)}}, false));
  d.instances.push_back(labelled({}, false));
  const auto cols = discretize(d, Discretization::kQuartile);
  const std::vector<std::string> want{"(-inf,2]", "(-inf,2]", "(2,4]", "(2,4]", "(4,6]",
                                      "(4,6]",    "(6,inf)",  "(6,inf)", "null"};
  EXPECT_EQ(cols[0], want);
  const auto raw = discretize(d, Discretization::kNone);
  EXPECT_EQ(raw[0][2], "3");
  EXPECT_EQ(raw[0][8], "null");
}

LabeledDataset random_categorical(std::uint64_t seed, std::size_t N) {
  Rng rng(seed);
  LabeledDataset d;
  d.features = {"f", "g", "h"};
  for (std::size_t i = 0; i < N; ++i) {
    const std::string f(1, static_cast<char>('a' + rng.uniform_index(4)));
    const std::string g(1, static_cast<char>('p' + rng.uniform_index(3)));
    const std::string h(1, static_cast<char>('x' + rng.uniform_index(2)));
    const bool anom = rng.uniform() < (f == "a" && g == "p" ? 0.6 : 0.1);
    d.instances.push_back(labelled({{"f", f}, {"g", g}, {"h", h}}, anom));
  }
  return d;
}

// Brute force: every subset of up to two distinct features, counted
// directly, scored with the same formulas.
TEST(Groups, MatchesExhaustiveCounting) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto d = random_categorical(seed, 400 + 50 * seed);
    GroupsParams p;
    p.top_m = 1000;
    p.discretization = Discretization::kNone;
    const auto rows = significant_groups(d, p);

    const double N = static_cast<double>(d.total()), K = static_cast<double>(d.anomalous());
    std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> want;
    for (const auto& x : d.instances) {
      const bool a = *x.label == Label::kAnomalous;
      std::vector<std::string> items;
      for (const auto& f : d.features) items.push_back(f + "=" + std::get<std::string>(x.values.at(f)));
      for (std::size_t i = 0; i < items.size(); ++i) {
        auto& s = want[items[i]];
        ++s.first;
        s.second += a;
        for (std::size_t j = i + 1; j < items.size(); ++j) {
          auto& t = want[items[i] + " & " + items[j]];
          ++t.first;
          t.second += a;
        }
      }
    }
    ASSERT_EQ(rows.size(), want.size());
    std::vector<double> pv;
    for (const auto& r : rows) {
      const auto it = want.find(subset_label(r.subset));
      ASSERT_NE(it, want.end()) << subset_label(r.subset);
      EXPECT_EQ(r.n, it->second.first);
      EXPECT_EQ(r.k, it->second.second);
      EXPECT_DOUBLE_EQ(r.enrichment, (static_cast<double>(r.k) / r.n) / (K / N));
      EXPECT_EQ(r.p_value, hypergeom_tail(d.total(), d.anomalous(), r.n, r.k));
      pv.push_back(r.p_value);
    }
    const auto q = benjamini_hochberg(pv);
    for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].q_value, q[i]);
    EXPECT_EQ(subset_label(rows[0].subset), "f=a & g=p");
  }
}

TEST(Groups, RowsAreOrdered) {
  const auto rows = significant_groups(random_categorical(9, 600), GroupsParams{});
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& a = rows[i - 1];
    const auto& b = rows[i];
    if (a.p_value != b.p_value) {
      EXPECT_LT(a.p_value, b.p_value);
    } else if (a.enrichment != b.enrichment) {
      EXPECT_GT(a.enrichment, b.enrichment);
    } else if (a.subset.size() != b.subset.size()) {
      EXPECT_LT(a.subset.size(), b.subset.size());
    } else {
      EXPECT_LT(subset_label(a.subset), subset_label(b.subset));
    }
  }
}

TEST(Groups, SubsetCoveringEverythingHasUnitEnrichment) {
  auto d = random_categorical(3, 300);
  d.features.push_back("site");
  for (auto& x : d.instances) x.values["site"] = std::string("s1");
  const auto rows = significant_groups(d, GroupsParams{});
  const auto it = std::find_if(rows.begin(), rows.end(), [](const EnrichmentRow& r) { return subset_label(r.subset) == "site=s1"; });
  ASSERT_NE(it, rows.end());
  EXPECT_EQ(it->enrichment, 1.0);
  EXPECT_EQ(it->p_value, 1.0);
  EXPECT_EQ(permutation_test(d, {{"site", "s1"}}, 200), 1.0);
}

TEST(Groups, InvariantUnderInstanceOrder) {
  const auto d = testing::planted_cause();
  const auto base = significant_groups(d, GroupsParams{});
  Rng rng(4);
  for (int rep = 0; rep < 3; ++rep) {
    auto shuffled = d;
    for (std::size_t i = shuffled.instances.size(); i > 1; --i) {
      std::swap(shuffled.instances[i - 1], shuffled.instances[rng.uniform_index(i)]);
    }
    EXPECT_EQ(significant_groups(shuffled, GroupsParams{}), base);
  }
}

TEST(Groups, PlantedCauseRanksFirst) {
  const auto d = testing::planted_cause();
  const auto rows = significant_groups(d, GroupsParams{});
  ASSERT_FALSE(rows.empty());
  EXPECT_EQ(subset_label(rows[0].subset), "cause=a");
  EXPECT_LE(rows[0].q_value, 0.01);
  EXPECT_EQ(rows[0].k, 90u);
}

TEST(Groups, SubsetSizeLimits) {
  const auto d = random_categorical(5, 300);
  GroupsParams p;
  p.max_subset_size = 1;
  for (const auto& r : significant_groups(d, p)) EXPECT_EQ(r.subset.size(), 1u);
  p.max_subset_size = 3;
  p.top_m = 1000;
  const auto rows = significant_groups(d, p);
  EXPECT_TRUE(std::any_of(rows.begin(), rows.end(), [](const EnrichmentRow& r) { return r.subset.size() == 3; }));
  p.max_subset_size = 4;
  EXPECT_EQ(code_of([&] { significant_groups(d, p); }), ErrorCode::kInvalidArgument);
}

TEST(Groups, Errors) {
  auto d = random_categorical(6, 50);
  for (auto& x : d.instances) x.label = Label::kRegular;
  EXPECT_EQ(code_of([&] { significant_groups(d, GroupsParams{}); }), ErrorCode::kNoAnomalousInstances);
  for (auto& x : d.instances) x.label = Label::kAnomalous;
  EXPECT_EQ(code_of([&] { significant_groups(d, GroupsParams{}); }), ErrorCode::kInvalidCounts);
}

TEST(Permutation, PlantedCauseHitsTheFloor) {
  const auto d = testing::planted_cause();
  EXPECT_DOUBLE_EQ(permutation_test(d, {{"cause", "a"}}, 1000), 1.0 / 1001.0);
}

TEST(Permutation, BoundedBelowAndDeterministic) {
  const auto d = testing::null_dataset(8);
  for (int R : {1, 10, 99}) {
    const double p = permutation_test(d, {{"cause", "b"}}, R, 3);
    EXPECT_GE(p, 1.0 / (R + 1));
    EXPECT_LE(p, 1.0);
    EXPECT_EQ(p, permutation_test(d, {{"cause", "b"}}, R, 3, Discretization::kQuartile, 1));
  }
  EXPECT_EQ(code_of([&] { permutation_test(d, {{"cause", "b"}}, 0); }), ErrorCode::kInvalidR);
  EXPECT_EQ(code_of([&] { permutation_test(d, {{"nope", "b"}}, 5); }), ErrorCode::kUnknownKey);
}

TEST(Welch, WorkedExample) {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 3, 4, 5, 6};
  const auto r = welch_t_test(a, b);
  EXPECT_NEAR(r.t, -1.0, 1e-12);
  EXPECT_NEAR(r.df, 8.0, 1e-12);
  EXPECT_NEAR(r.p, oracle::t_two_sided_p(-1.0, 8.0), 1e-9);
  EXPECT_NEAR(r.p, 0.3466, 1e-4);
  const auto s = welch_t_test(b, a);
  EXPECT_EQ(s.t, -r.t);
  EXPECT_EQ(s.p, r.p);
}

TEST(Welch, UnequalVariancesAgainstOracle) {
  Rng rng(10);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> a(3 + rng.uniform_index(30)), b(3 + rng.uniform_index(30));
    for (auto& x : a) x = rng.normal(0, 1);
    for (auto& x : b) x = rng.normal(0.5, 3);
    const auto r = welch_t_test(a, b);
    EXPECT_NEAR(r.p, oracle::t_two_sided_p(r.t, r.df), 1e-8);
    EXPECT_GE(r.df, std::min(a.size(), b.size()) - 1.0);
    EXPECT_LE(r.df, a.size() + b.size() - 2.0);
  }
}

TEST(Welch, DegenerateAndErrors) {
  const std::vector<double> c1{3, 3, 3}, c2{5, 5}, one{1};
  auto r = welch_t_test(c1, c1);
  EXPECT_EQ(r.t, 0.0);
  EXPECT_EQ(r.p, 1.0);
  EXPECT_EQ(r.df, 4.0);
  r = welch_t_test(c1, c2);
  EXPECT_EQ(r.t, -std::numeric_limits<double>::infinity());
  EXPECT_EQ(r.p, 0.0);
  EXPECT_EQ(r.df, 3.0);
  EXPECT_EQ(code_of([&] { welch_t_test(one, c1); }), ErrorCode::kInsufficientData);
}

TEST(Welch, DatasetGroups) {
  const auto d = testing::planted_cause();
  const auto r = welch_t_test(d, "noise_num");
  EXPECT_GE(r.p, 0.0);
  EXPECT_LE(r.p, 1.0);
  std::vector<double> a, b;
  for (const auto& x : d.instances) (*x.label == Label::kAnomalous ? a : b).push_back(std::get<double>(x.values.at("noise_num")));
  EXPECT_EQ(r.t, welch_t_test(a, b).t);
}

}  // namespace
}  // namespace mbbminer
