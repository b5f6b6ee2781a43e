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

#include "promptvc/training.hpp"

namespace promptvc {

TrainResult train(const PairSource& next_pair, const ConverterConfig& model_config, const OptimizerConfig& opt,
                  const TrainOptions& options) {
  opt.validate();
  TrainResult result{ConverterModel::initialized(model_config, opt.seed), {}};
  ConverterModel& model = result.model;
  Rng dropout_rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
  Rng* dropout = model_config.dropout > 0.0 ? &dropout_rng : nullptr;
  AdamState state;
  result.curve.reserve(static_cast<std::size_t>(opt.steps));
  const double inv_batch = 1.0 / static_cast<double>(opt.batch_size);

  for (int step = 1; step <= opt.steps; ++step) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.params().size());
    LossReport mean;
    for (int i = 0; i < opt.batch_size; ++i) {
      const TrainingPair pair = next_pair();
      if (pair.converter_input.dim() != model_config.input_dim || pair.target.dim() != model_config.output_dim)
        throw Error(Errc::dimension_mismatch, "train: pair feature dim differs from the converter config");
      const ForwardResult fwd = forward(model, pair.converter_input.data().cast<double>(), dropout);
      const LossOutput loss = total_loss(pair, fwd.pred, fwd.logits, options.loss);
      grad += backward(model, fwd.cache, loss.d_pred, loss.d_logits);
      mean.l_mse += loss.report.l_mse * inv_batch;
      mean.l_ssim += loss.report.l_ssim * inv_batch;
      mean.l_small += loss.report.l_small * inv_batch;
      mean.l_medium += loss.report.l_medium * inv_batch;
      mean.l_large += loss.report.l_large * inv_batch;
    }
    mean.l_pro = mean.l_small + mean.l_medium + mean.l_large;
    mean.l_total = mean.l_mse + mean.l_ssim + mean.l_pro;
    adam_step(model, grad * inv_batch, state, opt);
    if (options.on_step) options.on_step(step, mean);
    result.curve.push_back(std::move(mean));
  }
  return result;
}

double smoothed_total(const std::vector<LossReport>& curve, int end_step, int window) {
  if (end_step < 1 || end_step > static_cast<int>(curve.size()) || window < 1)
    throw Error(Errc::out_of_range, "smoothed_total: step outside the loss curve");
  const int begin = std::max(1, end_step - window + 1);
  double sum = 0.0;
  for (int s = begin; s <= end_step; ++s) sum += curve[static_cast<std::size_t>(s - 1)].l_total;
  return sum / static_cast<double>(end_step - begin + 1);
}

FeatureMatrix convert(const ConverterModel& model, const FeatureMatrix& prompt, const FeatureMatrix& content) {
  const FeatureMatrix input = concat_frames(prompt, content);
  const ForwardResult fwd = forward(model, input.data().cast<double>());
  return FeatureMatrix(fwd.pred.bottomRows(content.frames()).cast<float>(), content.hop_us());
}

}  // namespace promptvc
