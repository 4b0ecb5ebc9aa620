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

#ifndef MBBMINER_QRF_HPP
#define MBBMINER_QRF_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mbbminer/merge.hpp"

namespace mbbminer {

struct ForestParams {
  int n_trees = 100;
  int min_leaf = 5;
  // Defaults to ceil(sqrt(#context features)).
  std::optional<int> mtry;
  // Unlimited when empty; 0 makes every tree a single leaf.
  std::optional<int> max_depth;
  std::uint64_t seed = 42;
  // Disabled only for oracle checks: each tree then sees every instance once.
  bool bootstrap = true;
  // Worker threads for fitting; 0 uses the hardware concurrency.
  int threads = 0;
};

struct ContextColumn {
  std::string name;
  bool categorical = false;
  // Category code = position in this list.
  std::vector<std::string> categories;
};

// Preorder-addressable node. Leaves have feature == -1 and hold the
// bootstrap draws (indices into QrfModel::targets, with multiplicity).
struct TreeNode {
  int feature = -1;
  // Numeric: x <= threshold goes left. Categorical: x == category goes left.
  double threshold = 0.0;
  int category = -1;
  // Where a Null context value goes; the child with more training samples.
  bool null_left = true;
  int left = -1;
  int right = -1;
  std::vector<int> samples;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // root at index 0
  bool operator==(const Tree&) const = default;
};

struct QrfModel {
  std::string target;
  std::vector<ContextColumn> columns;
  Eigen::VectorXd targets;
  std::vector<Tree> trees;
  ForestParams params;

  bool fitted() const { return !trees.empty(); }
};

// Random-forest regression (CART variance splits on bootstrap samples) whose
// leaves keep their training targets. Instances with a Null target are
// dropped. Throws Error(kInsufficientData) with fewer than 2 * min_leaf
// usable instances, Error(kNoUsableFeatures) when no context feature carries
// data and Error(kInvalidArgument) for out-of-range parameters.
QrfModel fit_qrf(std::span<const Instance> instances, const std::string& target,
                 const std::vector<std::string>& context, const ForestParams& params);

// Context row for routing: numeric value, category code (-1 when unseen) or
// NaN for Null.
Eigen::VectorXd encode_context(const QrfModel& model, const Instance& x);

// Leaf index reached in `tree`.
int route(const Tree& tree, const Eigen::Ref<const Eigen::VectorXd>& row);

// Per-training-point weights w_i = (1/T) sum_t [i in leaf_t(x)] / |leaf_t(x)|,
// as (index, weight) pairs sorted by index.
std::vector<std::pair<int, double>> prediction_weights(const QrfModel& model, const Instance& x);

// Smallest training target y with weighted CDF(y) >= q. Throws
// Error(kUnfittedModel) or Error(kInvalidArgument) for q outside (0, 1).
double predict_quantile(const QrfModel& model, const Instance& x, double q);
std::vector<double> predict_quantiles(const QrfModel& model, const Instance& x,
                                      std::span<const double> qs);

// Versioned plain-text format documented in docs/model-format.md.
std::string serialize_model(const QrfModel& model);
QrfModel deserialize_model(std::string_view text);

}  // namespace mbbminer

#endif  // MBBMINER_QRF_HPP
