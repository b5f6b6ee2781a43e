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

#ifndef PROMPTVC_EVALKIT_HPP
#define PROMPTVC_EVALKIT_HPP

#include "promptvc/feature_io.hpp"
#include "promptvc/kmeans.hpp"

#include <string>
#include <utility>
#include <vector>

namespace promptvc {

struct SyntheticCorpusSpec {
  Index num_speakers = 4;
  Index frames_per_speaker = 500;
  Index dim = 16;
  Index content_archetypes = 8;
  double speaker_offset_scale = 1.0;
  double noise_sigma = 0.1;
  std::uint64_t seed = 7;
  /// Frames are laid out as runs of one archetype with lengths drawn
  /// uniformly from [min_run, max_run].
  Index min_run = 3;
  Index max_run = 8;

  void validate() const;
};

/// Corpus plus the factors that generated it.
struct SyntheticCorpus {
  SpeakerFeatures speakers;
  RowMatrixXd archetypes;
  RowMatrixXd speaker_offsets;
  /// Archetype index of every frame, per speaker.
  std::vector<std::vector<Index>> content_labels;
};

/// frame = archetype + speaker offset + N(0, noise_sigma^2) per channel.
/// Archetypes are N(0, 1) and offsets N(0, offset_scale^2), all seeded.
SyntheticCorpus generate_synthetic(const SyntheticCorpusSpec& spec);
SpeakerFeatures generate_corpus(const SyntheticCorpusSpec& spec);

/// "spk000", "spk001", ...
std::string synthetic_speaker_id(Index i);

/// FNV-1a over speaker ids, hop and payload bytes.
std::uint64_t corpus_checksum(const SpeakerFeatures& corpus);

/// Cosine of the time-averaged frames of a and b. Not a speaker-embedding
/// similarity; a feature-space stand-in for it.
double speaker_similarity_proxy(const FeatureMatrix& a, const FeatureMatrix& b);

struct CodebookStats {
  double utilization = 0.0;
  double perplexity = 0.0;
  std::vector<std::size_t> histogram;
};

/// utilization = used / K; perplexity = exp(entropy of the assignment histogram).
CodebookStats codebook_stats(const Codebook& cb, const std::vector<FeatureMatrix>& corpus);

}  // namespace promptvc

#endif  // PROMPTVC_EVALKIT_HPP
