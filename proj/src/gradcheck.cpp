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

#include "promptvc/gradcheck.hpp"

#include <algorithm>

namespace promptvc {

GradCheckResult check_gradient(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd& x,
                               const Eigen::VectorXd& analytic, double step, double floor) {
  if (analytic.size() != x.size()) throw Error(Errc::dimension_mismatch, "check_gradient: size mismatch");
  GradCheckResult out;
  for (Index i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = f(x);
    x[i] = saved - step;
    const double down = f(x);
    x[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double err = relative_error(analytic[i], numeric, floor);
    if (out.worst_index < 0 || err > out.max_rel_error) {
      out.max_rel_error = err;
      out.worst_index = i;
      out.worst_analytic = analytic[i];
      out.worst_numeric = numeric;
    }
    ++out.checked;
  }
  return out;
}

TrainingPair random_pair(const ConverterConfig& config, Index prompt_frames, Index content_frames, Rng& rng) {
  const auto random_features = [&rng](Index rows, Index cols) {
    RowMatrixXf m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.normal());
    return FeatureMatrix(std::move(m));
  };
  TrainingPair pair;
  pair.target = random_features(content_frames, config.output_dim);
  pair.content = random_features(content_frames, config.input_dim);
  pair.prompt = random_features(prompt_frames, config.input_dim);
  pair.converter_input = concat_frames(pair.prompt, pair.content);
  for (std::size_t j = 0; j < kNumTokenizers; ++j) {
    pair.target_ids[j].resize(static_cast<std::size_t>(content_frames));
    for (auto& id : pair.target_ids[j])
      id = static_cast<std::uint32_t>(rng.index(static_cast<std::uint64_t>(config.vocab_sizes[j])));
  }
  return pair;
}

ConverterGradCheck check_converter_gradient(const ConverterConfig& config, Index prompt_frames,
                                            Index content_frames, const LossConfig& loss, std::uint64_t seed,
                                            double step) {
  Rng rng(seed);
  ConverterModel model = ConverterModel::initialized(config, rng.next_u64());
  const TrainingPair pair = random_pair(config, prompt_frames, content_frames, rng);
  const RowMatrixXd input = pair.converter_input.data().cast<double>();

  const ForwardResult fwd = forward(model, input);
  const LossOutput out = total_loss(pair, fwd.pred, fwd.logits, loss);
  const Eigen::VectorXd analytic = backward(model, fwd.cache, out.d_pred, out.d_logits);

  Eigen::VectorXd params = model.params();
  const auto objective = [&](const Eigen::VectorXd& p) {
    model.params() = p;
    const ForwardResult f = forward(model, input);
    return total_loss(pair, f.pred, f.logits, loss).report.l_total;
  };
  ConverterGradCheck check;
  check.loss = out.report.l_total;
  check.result = check_gradient(objective, params, analytic, step);
  return check;
}

TinyGradCheckSetup tiny_grad_check_setup() {
  TinyGradCheckSetup s;
  s.converter.num_blocks = 2;
  s.converter.hidden_dim = 8;
  s.converter.ffn_dim = 16;
  s.converter.input_dim = 4;
  s.converter.output_dim = 4;
  s.converter.vocab_sizes = {3, 5, 7};
  s.converter.max_len = 12;
  s.loss.ssim.window = 5;
  return s;
}

}  // namespace promptvc
