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

#ifndef MBBMINER_ROOTCAUSE_HPP
#define MBBMINER_ROOTCAUSE_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mbbminer/merge.hpp"

namespace mbbminer {

// Every instance must carry a label.
struct LabeledDataset {
  std::vector<Instance> instances;
  std::vector<std::string> features;

  std::uint64_t total() const { return instances.size(); }
  std::uint64_t anomalous() const;
};

// (feature, discretized value) pairs, sorted by feature name.
using Subset = std::vector<std::pair<std::string, std::string>>;

// "f=v & g=w"
std::string subset_label(const Subset& s);

struct EnrichmentRow {
  Subset subset;
  std::uint64_t n = 0;  // instances matching the subset
  std::uint64_t k = 0;  // anomalous instances matching the subset
  double enrichment = 0.0;
  double p_value = 1.0;
  double q_value = 1.0;
  bool operator==(const EnrichmentRow&) const = default;
};

enum class Discretization { kQuartile, kNone };
std::optional<Discretization> parse_discretization(std::string_view s);
std::string_view discretization_name(Discretization d);

struct GroupsParams {
  // 1 to 3.
  int max_subset_size = 2;
  Discretization discretization = Discretization::kQuartile;
  // Singletons (best first) that seed multi-feature subsets.
  int top_m = 50;
  int threads = 0;
};

// log P(X = k) for X ~ Hypergeometric(N, K, n); -inf outside the support.
double hypergeom_log_pmf(std::uint64_t N, std::uint64_t K, std::uint64_t n, std::uint64_t k);

// P(X >= k). Throws Error(kInvalidCounts) unless k <= n <= N and k <= K <= N.
// The result lies in (0, 1]; underflow is clamped to the smallest normal
// double.
double hypergeom_tail(std::uint64_t N, std::uint64_t K, std::uint64_t n, std::uint64_t k);

// Step-up adjusted q-values in input order.
std::vector<double> benjamini_hochberg(std::span<const double> p);

// Per-feature discretized labels (one column per feature, one entry per
// instance). Numeric features are cut at the lower quartile order statistics
// into "(-inf,c1]", "(c1,c2]", ..., "(c3,inf)"; with kNone numbers are kept as
// their shortest text. Null becomes "null".
std::vector<std::vector<std::string>> discretize(const LabeledDataset& data, Discretization d);

// Singletons, then multi-feature subsets seeded by the top_m singletons.
// Rows are ordered by p ascending, enrichment descending, subset size, label.
// Throws Error(kNoAnomalousInstances) when K = 0 and Error(kInvalidCounts)
// when every instance is anomalous.
std::vector<EnrichmentRow> significant_groups(const LabeledDataset& data, const GroupsParams& p = {});

// Label-permutation p-value for the subset's enrichment. Throws
// Error(kInvalidR) for R < 1.
double permutation_test(const LabeledDataset& data, const Subset& subset, int R = 1000,
                        std::uint64_t seed = 42,
                        Discretization d = Discretization::kQuartile, int threads = 0);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

// Welch's unequal-variance test of a versus b with a two-sided p. When both
// variances are zero, |t| is infinite with p = 0 if the means differ and
// t = 0, p = 1 otherwise; df is then na + nb - 2. Throws
// Error(kInsufficientData) when a group has fewer than 2 values.
TTestResult welch_t_test(std::span<const double> a, std::span<const double> b);

// Anomalous group versus regular group on a numeric feature.
TTestResult welch_t_test(const LabeledDataset& data, const std::string& feature);

}  // namespace mbbminer

#endif  // MBBMINER_ROOTCAUSE_HPP
