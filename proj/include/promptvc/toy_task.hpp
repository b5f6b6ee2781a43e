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

#ifndef PROMPTVC_TOY_TASK_HPP
#define PROMPTVC_TOY_TASK_HPP

#include "promptvc/decoupler.hpp"
#include "promptvc/evalkit.hpp"
#include "promptvc/pair_sampler.hpp"
#include "promptvc/teacher_pool.hpp"
#include "promptvc/training.hpp"

#include <functional>
#include <string>
#include <vector>

namespace promptvc {

/// End-to-end desk-scale run on the synthetic speaker corpus: fit the
/// decoupler and tokenizers, build the teacher pool, train the converter on
/// dual-mode pairs and score conversions of held-out utterances.
struct ToyTaskConfig {
  SyntheticCorpusSpec corpus{.num_speakers = 4,
                             .frames_per_speaker = 1500,
                             .dim = 16,
                             .content_archetypes = 8,
                             .speaker_offset_scale = 1.0,
                             .noise_sigma = 0.1,
                             .seed = 7};
  /// Tail of every speaker's frames kept out of fitting and training.
  Index heldout_frames = 300;
  Index utterance_frames = 100;
  DecouplerConfig decoupler;
  std::array<Index, kNumTokenizers> codebooks{8, 16, 32};
  Index k = 8;
  PairConfig pairs;
  /// Teacher pool and tokenizers are skipped when false (p_conversion must be 0).
  bool use_teacher = true;
  ConverterConfig converter;
  OptimizerConfig optimizer;
  LossConfig loss;
};

struct HeldoutConversion {
  std::string source_speaker;
  std::string target_speaker;
  double proxy_target = 0.0;
  double proxy_source = 0.0;
};

struct ToyTaskResult {
  TrainResult training;
  double smoothed_start = 0.0;
  double smoothed_end = 0.0;
  std::vector<HeldoutConversion> conversions;
  double mean_proxy_target = 0.0;
  double mean_proxy_source = 0.0;
  double conversion_fraction = 0.0;
};

ToyTaskResult run_toy_task(const ToyTaskConfig& config,
                           const std::function<void(int, const LossReport&)>& on_step = {});

}  // namespace promptvc

#endif  // PROMPTVC_TOY_TASK_HPP
