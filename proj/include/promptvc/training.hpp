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

#ifndef PROMPTVC_TRAINING_HPP
#define PROMPTVC_TRAINING_HPP

#include "promptvc/converter.hpp"

#include <functional>
#include <vector>

namespace promptvc {

using PairSource = std::function<TrainingPair()>;

struct TrainOptions {
  LossConfig loss;
  /// Called after every optimizer step with the 1-based step and the
  /// batch-mean report.
  std::function<void(int, const LossReport&)> on_step;
};

struct TrainResult {
  ConverterModel model;
  /// One batch-mean report per optimizer step.
  std::vector<LossReport> curve;
};

/// Forward, prompt-masked total loss, backward and Adam, for opt.steps steps
/// of opt.batch_size pairs each (gradients averaged over the batch).
TrainResult train(const PairSource& next_pair, const ConverterConfig& model_config, const OptimizerConfig& opt,
                  const TrainOptions& options = {});

/// Mean l_total over steps (end - window, end], 1-based, clamped at step 1.
double smoothed_total(const std::vector<LossReport>& curve, int end_step, int window = 50);

/// Content-position predictions for prompt ++ content.
FeatureMatrix convert(const ConverterModel& model, const FeatureMatrix& prompt, const FeatureMatrix& content);

}  // namespace promptvc

#endif  // PROMPTVC_TRAINING_HPP
