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

#ifndef MBBMINER_KDE_HPP
#define MBBMINER_KDE_HPP

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

namespace mbbminer {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Type-7 (linear interpolation) sample quantile of sorted data.
template <typename Scalar>
Scalar sorted_quantile(const Eigen::Ref<const VectorX<Scalar>>& sorted, Scalar q) {
  const Eigen::Index n = sorted.size();
  const Scalar pos = q * static_cast<Scalar>(n - 1);
  const Eigen::Index lo = static_cast<Eigen::Index>(std::floor(pos));
  const Eigen::Index hi = std::min(lo + 1, n - 1);
  return sorted(lo) + (pos - static_cast<Scalar>(lo)) * (sorted(hi) - sorted(lo));
}

// Sample standard deviation (n - 1).
template <typename Scalar>
Scalar sample_sd(const Eigen::Ref<const VectorX<Scalar>>& x) {
  if (x.size() < 2) return Scalar(0);
  const Scalar mean = x.mean();
  return std::sqrt((x.array() - mean).square().sum() / static_cast<Scalar>(x.size() - 1));
}

// 0.9 * min(sd, IQR / 1.34) * n^(-1/5). When one spread measure is zero the
// other is used; when both are, a small multiple of the data magnitude.
template <typename Scalar>
Scalar silverman_bandwidth(const Eigen::Ref<const VectorX<Scalar>>& x) {
  VectorX<Scalar> sorted = x;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  const Scalar sd = sample_sd<Scalar>(x);
  const Scalar iqr = (sorted_quantile<Scalar>(sorted, Scalar(0.75)) -
                      sorted_quantile<Scalar>(sorted, Scalar(0.25))) / Scalar(1.34);
  Scalar spread = std::min(sd, iqr);
  if (!(spread > 0)) spread = std::max(sd, iqr);
  if (!(spread > 0)) {
    const Scalar mag = std::max(Scalar(1), std::abs(x.mean()));
    return Scalar(1e-3) * mag;
  }
  return Scalar(0.9) * spread * std::pow(static_cast<Scalar>(x.size()), Scalar(-0.2));
}

// Gaussian-kernel density estimate evaluated at each grid point.
template <typename Scalar>
VectorX<Scalar> kde_on_grid(const Eigen::Ref<const VectorX<Scalar>>& sample, Scalar h,
                            const Eigen::Ref<const VectorX<Scalar>>& grid) {
  const Scalar norm = Scalar(1) / (static_cast<Scalar>(sample.size()) * h *
                                   std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>));
  VectorX<Scalar> out(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    out(i) = norm * ((sample.array() - grid(i)) / h).square().unaryExpr([](Scalar z) {
      return std::exp(Scalar(-0.5) * z);
    }).sum();
  }
  return out;
}

// Floors a grid density and rescales it to integrate to one.
template <typename Scalar>
VectorX<Scalar> floor_normalize(const Eigen::Ref<const VectorX<Scalar>>& density, Scalar dx,
                                Scalar floor) {
  VectorX<Scalar> p = density.cwiseMax(floor);
  return p / (p.sum() * dx);
}

// sum p ln(p / q) dx over a shared grid; clamped at zero.
template <typename Scalar>
Scalar kl_divergence(const Eigen::Ref<const VectorX<Scalar>>& p,
                     const Eigen::Ref<const VectorX<Scalar>>& q, Scalar dx) {
  const Scalar kl = (p.array() * (p.array() / q.array()).log()).sum() * dx;
  return std::max(Scalar(0), kl);
}

}  // namespace mbbminer

#endif  // MBBMINER_KDE_HPP
