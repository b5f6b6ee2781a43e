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

#include "promptvc/kmeans.hpp"

#include "promptvc/rng.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace promptvc {
namespace {

// Squared distance from every point to its nearest centroid, plus the index.
// Distances are formed from explicit differences so ties resolve identically
// to a naive scan.
void nearest(const RowMatrixXd& points, const RowMatrixXd& centroids, TokenIds& ids,
             Eigen::VectorXd& dist) {
  const Index n = points.rows();
  const Index k = centroids.rows();
  ids.resize(static_cast<std::size_t>(n));
  dist.resize(n);
  for (Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    Index best_j = 0;
    for (Index j = 0; j < k; ++j) {
      const double d = (points.row(i) - centroids.row(j)).squaredNorm();
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    ids[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(best_j);
    dist[i] = best;
  }
}

// k-means++: the first `pinned` rows are given; the rest are drawn with
// probability proportional to squared distance from the chosen set.
RowMatrixXd seed_centroids(const RowMatrixXd& points, Index k, const KMeansConfig& config, Rng& rng) {
  const Index n = points.rows();
  const Index dim = points.cols();
  RowMatrixXd centroids(k, dim);
  Index filled = 0;
  if (config.pinned_centroids) {
    const RowMatrixXd& pinned = *config.pinned_centroids;
    centroids.topRows(pinned.rows()) = pinned;
    filled = pinned.rows();
  }
  if (filled == 0) {
    centroids.row(0) = points.row(static_cast<Index>(rng.index(static_cast<std::uint64_t>(n))));
    filled = 1;
  }
  Eigen::VectorXd closest(n);
  for (Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < filled; ++j) best = std::min(best, (points.row(i) - centroids.row(j)).squaredNorm());
    closest[i] = best;
  }
  while (filled < k) {
    const double total = closest.sum();
    Index pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        acc += closest[i];
        if (acc > target && closest[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Index>(rng.index(static_cast<std::uint64_t>(n)));
    }
    centroids.row(filled) = points.row(pick);
    for (Index i = 0; i < n; ++i)
      closest[i] = std::min(closest[i], (points.row(i) - centroids.row(filled)).squaredNorm());
    ++filled;
  }
  return centroids;
}

}  // namespace

double mean_distortion(const Codebook& cb, const RowMatrixXd& points, const TokenIds& ids) {
  if (points.rows() == 0) return 0.0;
  const RowMatrixXd c = cb.centroids.cast<double>();
  double sum = 0.0;
  for (Index i = 0; i < points.rows(); ++i)
    sum += (points.row(i) - c.row(ids[static_cast<std::size_t>(i)])).squaredNorm();
  return sum / static_cast<double>(points.rows());
}

namespace detail {

Codebook fit_impl(const RowMatrixXd& points, Index k, const KMeansConfig& config) {
  const Index n = points.rows();
  if (n == 0 || points.cols() == 0) throw Error(Errc::invalid_argument, "kmeans fit: empty input");
  if (k < 1) throw Error(Errc::invalid_argument, "kmeans fit: K must be >= 1");
  if (k > n)
    throw Error(Errc::invalid_argument,
                "kmeans fit: K=" + std::to_string(k) + " exceeds N=" + std::to_string(n));
  if (!points.allFinite()) throw Error(Errc::non_finite, "kmeans fit: non-finite input");
  if (config.max_iters < 1) throw Error(Errc::invalid_argument, "kmeans fit: max_iters must be >= 1");
  Index pinned = 0;
  if (config.pinned_centroids) {
    pinned = config.pinned_centroids->rows();
    if (config.pinned_centroids->cols() != points.cols())
      throw Error(Errc::dimension_mismatch, "kmeans fit: pinned centroid dim differs from points");
    if (pinned > k) throw Error(Errc::invalid_argument, "kmeans fit: more pinned centroids than K");
    if (!config.pinned_centroids->allFinite())
      throw Error(Errc::non_finite, "kmeans fit: non-finite pinned centroid");
  }
  const Index frozen = config.freeze_pinned ? pinned : 0;

  Rng rng(config.seed);
  RowMatrixXd centroids = seed_centroids(points, k, config, rng);

  Codebook cb;
  cb.seed = config.seed;
  TokenIds ids;
  Eigen::VectorXd dist;
  RowMatrixXd sums(k, points.cols());
  std::vector<Index> counts(static_cast<std::size_t>(k));

  for (int iter = 0;; ++iter) {
    nearest(points, centroids, ids, dist);
    const double distortion = dist.mean();
    const double previous = cb.fit_distortion_trace.empty() ? 0.0 : cb.fit_distortion_trace.back();
    cb.fit_distortion_trace.push_back(distortion);
    if (iter >= config.max_iters) break;
    if (iter > 0 && (previous <= 0.0 || (previous - distortion) < config.tol * previous)) break;
    if (distortion == 0.0) break;

    sums.setZero();
    std::fill(counts.begin(), counts.end(), 0);
    for (Index i = 0; i < n; ++i) {
      const auto j = ids[static_cast<std::size_t>(i)];
      sums.row(j) += points.row(i);
      ++counts[j];
    }
    // Points already used to re-seed an empty cluster in this update.
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    for (Index j = frozen; j < k; ++j) {
      if (counts[static_cast<std::size_t>(j)] > 0) {
        centroids.row(j) = sums.row(j) / static_cast<double>(counts[static_cast<std::size_t>(j)]);
        continue;
      }
      Index worst = -1;
      for (Index i = 0; i < n; ++i) {
        if (taken[static_cast<std::size_t>(i)]) continue;
        if (worst < 0 || dist[i] > dist[worst]) worst = i;
      }
      if (worst < 0) continue;
      taken[static_cast<std::size_t>(worst)] = true;
      centroids.row(j) = points.row(worst);
    }
  }

  cb.centroids = centroids.cast<float>();
  nearest(points, cb.centroids.cast<double>(), ids, dist);
  cb.distortion = dist.mean();
  return cb;
}

TokenIds assign_impl(const Codebook& cb, const RowMatrixXd& points) {
  if (points.cols() != cb.dim())
    throw Error(Errc::dimension_mismatch, "assign: point dim " + std::to_string(points.cols()) +
                                              " vs codebook dim " + std::to_string(cb.dim()));
  TokenIds ids;
  Eigen::VectorXd dist;
  nearest(points, cb.centroids.cast<double>(), ids, dist);
  return ids;
}

}  // namespace detail
}  // namespace promptvc
