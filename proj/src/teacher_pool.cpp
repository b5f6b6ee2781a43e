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

#include "promptvc/teacher_pool.hpp"

#include <algorithm>
#include <numeric>

namespace promptvc {
namespace {

constexpr Index kQueryBlock = 64;

}  // namespace

std::vector<std::string> MatchingPool::speaker_ids() const {
  std::vector<std::string> ids;
  ids.reserve(speakers_.size());
  for (const auto& [id, frames] : speakers_) ids.push_back(id);
  return ids;
}

const MatchingPool::SpeakerFrames& MatchingPool::speaker(const std::string& id) const {
  auto it = speakers_.find(id);
  if (it == speakers_.end()) throw Error(Errc::not_found, "unknown speaker '" + id + "'");
  return it->second;
}

MatchingPool build_pool(const SpeakerFeatures& entries, Index k,
                        Similarity similarity) {
  if (k < 1) throw Error(Errc::invalid_argument, "build_pool: k must be >= 1");
  if (entries.empty()) throw Error(Errc::invalid_argument, "build_pool: no entries");
  MatchingPool pool;
  pool.k_ = k;
  pool.similarity_ = similarity;
  pool.dim_ = entries.front().second.dim();
  pool.hop_us_ = entries.front().second.hop_us();

  std::map<std::string, std::vector<const FeatureMatrix*>> grouped;
  for (const auto& [id, m] : entries) {
    if (m.dim() != pool.dim_)
      throw Error(Errc::dimension_mismatch, "build_pool: speaker '" + id + "' has dim " +
                                                std::to_string(m.dim()) + ", expected " +
                                                std::to_string(pool.dim_));
    grouped[id].push_back(&m);
  }
  for (const auto& [id, parts] : grouped) {
    Index total = 0;
    for (const auto* m : parts) total += m->frames();
    if (total < k)
      throw Error(Errc::invalid_argument, "build_pool: speaker '" + id + "' has " +
                                              std::to_string(total) + " frames, fewer than k=" +
                                              std::to_string(k));
    MatchingPool::SpeakerFrames sf;
    sf.frames.resize(total, pool.dim_);
    Index at = 0;
    for (const auto* m : parts) {
      sf.frames.middleRows(at, m->frames()) = m->data();
      at += m->frames();
    }
    if (similarity == Similarity::cosine) {
      sf.normalized = sf.frames.cast<double>();
      for (Index i = 0; i < total; ++i) {
        const double norm = sf.normalized.row(i).norm();
        if (norm == 0.0)
          throw Error(Errc::invalid_argument,
                      "build_pool: zero-norm frame " + std::to_string(i) + " for speaker '" + id + "'");
        sf.normalized.row(i) /= norm;
      }
    }
    pool.speakers_.emplace(id, std::move(sf));
  }
  return pool;
}

FeatureMatrix knn_convert(const MatchingPool& pool, const std::string& speaker, const FeatureMatrix& source) {
  const auto& target = pool.speaker(speaker);
  if (source.dim() != pool.dim())
    throw Error(Errc::dimension_mismatch, "knn_convert: source dim " + std::to_string(source.dim()) +
                                              " vs pool dim " + std::to_string(pool.dim()));
  const Index n_src = source.frames();
  const Index n_pool = target.frames.rows();
  const Index k = pool.k();
  const RowMatrixXd src = source.data().cast<double>();
  const RowMatrixXd pool_d = target.frames.cast<double>();

  RowMatrixXd queries = src;
  if (pool.similarity() == Similarity::cosine) {
    for (Index i = 0; i < n_src; ++i) {
      const double norm = queries.row(i).norm();
      if (norm == 0.0)
        throw Error(Errc::invalid_argument, "knn_convert: zero-norm source frame " + std::to_string(i));
      queries.row(i) /= norm;
    }
  }
  Eigen::VectorXd pool_sq;
  if (pool.similarity() == Similarity::neg_squared_euclidean) pool_sq = pool_d.rowwise().squaredNorm();

  RowMatrixXf out(n_src, source.dim());
  std::vector<Index> order(static_cast<std::size_t>(n_pool));
  RowMatrixXd scores;
  for (Index b0 = 0; b0 < n_src; b0 += kQueryBlock) {
    const Index rows = std::min(kQueryBlock, n_src - b0);
    if (pool.similarity() == Similarity::cosine) {
      scores.noalias() = queries.middleRows(b0, rows) * target.normalized.transpose();
    } else {
      scores.resize(rows, n_pool);
      for (Index r = 0; r < rows; ++r)
        for (Index j = 0; j < n_pool; ++j) scores(r, j) = -(src.row(b0 + r) - pool_d.row(j)).squaredNorm();
    }
    for (Index r = 0; r < rows; ++r) {
      std::iota(order.begin(), order.end(), Index{0});
      const auto better = [&](Index a, Index b) {
        const double sa = scores(r, a);
        const double sb = scores(r, b);
        return sa > sb || (sa == sb && a < b);
      };
      std::nth_element(order.begin(), order.begin() + (k - 1), order.end(), better);
      std::sort(order.begin(), order.begin() + k);
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(source.dim());
      for (Index j = 0; j < k; ++j) acc += pool_d.row(order[static_cast<std::size_t>(j)]);
      out.row(b0 + r) = (acc / static_cast<double>(k)).cast<float>();
    }
  }
  return FeatureMatrix(std::move(out), source.hop_us());
}

std::string sample_speaker(const MatchingPool& pool, Rng& rng) {
  if (pool.num_speakers() == 0) throw Error(Errc::invalid_argument, "sample_speaker: empty pool");
  const auto ids = pool.speaker_ids();
  return ids[rng.index(ids.size())];
}

}  // namespace promptvc
