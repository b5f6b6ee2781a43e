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

#ifndef PROMPTVC_TEACHER_POOL_HPP
#define PROMPTVC_TEACHER_POOL_HPP

#include "promptvc/feature_io.hpp"
#include "promptvc/rng.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace promptvc {

enum class Similarity {
  cosine,
  /// Negative squared Euclidean distance; kept for ablation.
  neg_squared_euclidean,
};

/// Per-speaker frame stores queried by exact k-nearest-neighbour matching.
class MatchingPool {
 public:
  struct SpeakerFrames {
    RowMatrixXf frames;
    /// Rows scaled to unit norm (cosine); unused for Euclidean.
    RowMatrixXd normalized;
  };

  Index k() const { return k_; }
  Index dim() const { return dim_; }
  Similarity similarity() const { return similarity_; }
  std::uint32_t hop_us() const { return hop_us_; }

  std::size_t num_speakers() const { return speakers_.size(); }
  bool contains(const std::string& speaker) const { return speakers_.count(speaker) != 0; }
  /// Speaker ids in sorted order.
  std::vector<std::string> speaker_ids() const;
  const SpeakerFrames& speaker(const std::string& id) const;

 private:
  friend MatchingPool build_pool(const SpeakerFeatures&, Index,
                                 Similarity);
  std::map<std::string, SpeakerFrames> speakers_;
  Index k_ = 8;
  Index dim_ = 0;
  std::uint32_t hop_us_ = FeatureMatrix::kDefaultHopUs;
  Similarity similarity_ = Similarity::cosine;
};

/// Entries with the same speaker id are concatenated in input order.
MatchingPool build_pool(const SpeakerFeatures& entries, Index k,
                        Similarity similarity = Similarity::cosine);

/// Replaces each source frame by the unweighted mean of its k most similar
/// frames of `speaker`. Ties prefer the lower pool-frame index; the mean is
/// accumulated in ascending pool-frame order.
FeatureMatrix knn_convert(const MatchingPool& pool, const std::string& speaker, const FeatureMatrix& source);

/// Uniform draw over the sorted speaker ids.
std::string sample_speaker(const MatchingPool& pool, Rng& rng);

}  // namespace promptvc

#endif  // PROMPTVC_TEACHER_POOL_HPP
