// Copyright 2026 The promptvc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PROMPTVC_KMEANS_HPP
#define PROMPTVC_KMEANS_HPP

#include "promptvc/common.hpp"

#include <cstdint>
#include <optional>
#include <utility>

namespace promptvc {

/// K centroids with the metadata of the fit that produced them.
///
/// Centroids are stored in single precision (the persisted width); all
/// distance arithmetic is done in double.
struct Codebook {
  RowMatrixXf centroids;
  /// Mean squared distortion after each assignment step of Lloyd.
  std::vector<double> fit_distortion_trace;
  /// Mean squared distortion of the stored centroids on the fit set.
  double distortion = 0.0;
  std::uint64_t seed = 0;

  Index size() const { return centroids.rows(); }
  Index dim() const { return centroids.cols(); }
};

struct KMeansConfig {
  int max_iters = 100;
  /// Stop once (previous - current) / previous distortion falls below this.
  double tol = 1e-6;
  std::uint64_t seed = 0;
  /// Rows placed in the first centroid slots at init instead of k-means++.
  std::optional<RowMatrixXd> pinned_centroids;
  /// Hold pinned centroids fixed through Lloyd updates.
  bool freeze_pinned = false;
};

namespace detail {
Codebook fit_impl(const RowMatrixXd& points, Index k, const KMeansConfig& config);
TokenIds assign_impl(const Codebook& cb, const RowMatrixXd& points);
}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding under squared Euclidean distance.
///
/// Requires 1 <= k <= points.rows() and finite input. Empty clusters are
/// re-seeded at the point with the largest current quantization error, so
/// the distortion trace is non-increasing and centroids stay finite.
template <typename Derived>
Codebook fit(const Eigen::MatrixBase<Derived>& points, Index k, const KMeansConfig& config = {}) {
  return detail::fit_impl(points.template cast<double>(), k, config);
}

/// Nearest centroid per row; ties go to the lowest centroid index.
template <typename Derived>
TokenIds assign(const Codebook& cb, const Eigen::MatrixBase<Derived>& points) {
  return detail::assign_impl(cb, points.template cast<double>());
}

/// Centroid-substituted rows plus the ids that selected them.
template <typename Derived>
std::pair<RowMatrixXf, TokenIds> quantize(const Codebook& cb, const Eigen::MatrixBase<Derived>& points) {
  TokenIds ids = assign(cb, points);
  RowMatrixXf out(points.rows(), cb.dim());
  for (Index i = 0; i < out.rows(); ++i) out.row(i) = cb.centroids.row(ids[i]);
  return {std::move(out), std::move(ids)};
}

/// Mean over rows of the squared distance to the assigned centroid.
double mean_distortion(const Codebook& cb, const RowMatrixXd& points, const TokenIds& ids);

}  // namespace promptvc

#endif  // PROMPTVC_KMEANS_HPP
