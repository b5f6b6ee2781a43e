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

#ifndef PROMPTVC_PAIR_SAMPLER_HPP
#define PROMPTVC_PAIR_SAMPLER_HPP

#include "promptvc/decoupler.hpp"
#include "promptvc/kmeans.hpp"
#include "promptvc/rng.hpp"
#include "promptvc/teacher_pool.hpp"

#include <array>
#include <string>
#include <vector>

namespace promptvc {

enum class PairMode { reconstruction, conversion };

const char* to_string(PairMode mode);

inline constexpr std::size_t kNumTokenizers = 3;

/// Small, medium and large codebooks, in that order.
using Tokenizers = std::array<Codebook, kNumTokenizers>;

struct PairConfig {
  double p_conversion = 0.5;
  Index prompt_frames = 150;
  /// Shorter sources are rejected.
  Index min_frames = 30;
};

struct TrainingPair {
  PairMode mode = PairMode::reconstruction;
  /// Enhanced content of the source.
  FeatureMatrix content;
  /// Contiguous slice of `target`.
  FeatureMatrix prompt;
  FeatureMatrix target;
  std::array<TokenIds, kNumTokenizers> target_ids;
  /// prompt followed by content along time.
  FeatureMatrix converter_input;
  /// Teacher speaker in conversion mode, empty otherwise.
  std::string speaker;
  Index prompt_start = 0;

  Index prompt_frames() const { return prompt.frames(); }
};

/// Draws one training pair. Mode is conversion iff u < p_conversion for
/// u ~ U[0, 1). In conversion mode `pool` must be non-null. Draw order:
/// u, then the teacher speaker (conversion only), then the prompt start.
TrainingPair make_pair(const FeatureMatrix& source, const DecouplerModel& decoupler, const MatchingPool* pool,
                       const Tokenizers& tokenizers, const PairConfig& config, Rng& rng);

/// Fits the three progressive tokenizers on pooled target frames.
Tokenizers fit_tokenizers(const RowMatrixXd& frames, const std::array<Index, kNumTokenizers>& sizes,
                          std::uint64_t seed, int max_iters = 100);

/// Endless pair stream over a fixed set of source utterances.
class PairSampler {
 public:
  PairSampler(std::vector<FeatureMatrix> sources, const DecouplerModel& decoupler, const MatchingPool* pool,
              const Tokenizers& tokenizers, PairConfig config, std::uint64_t seed);

  TrainingPair next();

 private:
  std::vector<FeatureMatrix> sources_;
  const DecouplerModel& decoupler_;
  const MatchingPool* pool_;
  const Tokenizers& tokenizers_;
  PairConfig config_;
  Rng rng_;
};

}  // namespace promptvc

#endif  // PROMPTVC_PAIR_SAMPLER_HPP
