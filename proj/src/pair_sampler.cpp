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

#include "promptvc/pair_sampler.hpp"

namespace promptvc {

const char* to_string(PairMode mode) {
  return mode == PairMode::conversion ? "conversion" : "reconstruction";
}

TrainingPair make_pair(const FeatureMatrix& source, const DecouplerModel& decoupler, const MatchingPool* pool,
                       const Tokenizers& tokenizers, const PairConfig& config, Rng& rng) {
  if (!(config.p_conversion >= 0.0 && config.p_conversion <= 1.0))
    throw Error(Errc::invalid_argument, "make_pair: p_conversion must lie in [0, 1]");
  if (config.prompt_frames < 1) throw Error(Errc::invalid_argument, "make_pair: prompt_frames must be >= 1");
  if (source.frames() < config.min_frames)
    throw Error(Errc::invalid_argument, "make_pair: source has " + std::to_string(source.frames()) +
                                            " frames, minimum is " + std::to_string(config.min_frames));
  for (const auto& tok : tokenizers) {
    if (tok.dim() != source.dim())
      throw Error(Errc::dimension_mismatch, "make_pair: tokenizer dim differs from source");
  }

  TrainingPair pair;
  const double u = rng.uniform();
  pair.mode = u < config.p_conversion ? PairMode::conversion : PairMode::reconstruction;
  if (pair.mode == PairMode::conversion) {
    if (pool == nullptr) throw Error(Errc::invalid_argument, "make_pair: conversion mode needs a matching pool");
    if (pool->dim() != source.dim()) throw Error(Errc::dimension_mismatch, "make_pair: pool dim differs from source");
    pair.speaker = sample_speaker(*pool, rng);
    pair.target = knn_convert(*pool, pair.speaker, source);
  } else {
    pair.target = source;
  }

  const Index prompt_len = std::min(config.prompt_frames, pair.target.frames());
  const Index starts = pair.target.frames() - prompt_len + 1;
  pair.prompt_start = static_cast<Index>(rng.index(static_cast<std::uint64_t>(starts)));
  pair.prompt = slice_frames(pair.target, pair.prompt_start, prompt_len);

  pair.content = encode(decoupler, source).enhanced;
  for (std::size_t j = 0; j < kNumTokenizers; ++j) pair.target_ids[j] = assign(tokenizers[j], pair.target.data());
  pair.converter_input = concat_frames(pair.prompt, pair.content);
  return pair;
}

Tokenizers fit_tokenizers(const RowMatrixXd& frames, const std::array<Index, kNumTokenizers>& sizes,
                          std::uint64_t seed, int max_iters) {
  for (std::size_t j = 1; j < kNumTokenizers; ++j) {
    if (sizes[j] <= sizes[j - 1])
      throw Error(Errc::invalid_argument, "fit_tokenizers: codebook sizes must be strictly increasing");
  }
  Tokenizers out;
  for (std::size_t j = 0; j < kNumTokenizers; ++j) {
    KMeansConfig cfg;
    cfg.seed = seed + j;
    cfg.max_iters = max_iters;
    out[j] = fit(frames, sizes[j], cfg);
  }
  return out;
}

PairSampler::PairSampler(std::vector<FeatureMatrix> sources, const DecouplerModel& decoupler,
                         const MatchingPool* pool, const Tokenizers& tokenizers, PairConfig config,
                         std::uint64_t seed)
    : sources_(std::move(sources)),
      decoupler_(decoupler),
      pool_(pool),
      tokenizers_(tokenizers),
      config_(config),
      rng_(seed) {
  if (sources_.empty()) throw Error(Errc::invalid_argument, "PairSampler: no source utterances");
}

TrainingPair PairSampler::next() {
  const auto& source = sources_[rng_.index(sources_.size())];
  return make_pair(source, decoupler_, pool_, tokenizers_, config_, rng_);
}

}  // namespace promptvc
