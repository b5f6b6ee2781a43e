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

#ifndef PROMPTVC_GRADCHECK_HPP
#define PROMPTVC_GRADCHECK_HPP

#include "promptvc/converter.hpp"

#include <cmath>
#include <functional>

namespace promptvc {

struct GradCheckResult {
  double max_rel_error = 0.0;
  Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  Index checked = 0;
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps entries whose true
/// gradient is (near) zero from dividing rounding noise by zero.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every
/// coordinate, compared against `analytic`. `x` is restored on return.
GradCheckResult check_gradient(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd& x,
                               const Eigen::VectorXd& analytic, double step = 1e-4, double floor = 1e-6);

/// Random pair sized for a converter config: prompt then content frames,
/// random target and token ids. Used by grad-check.
TrainingPair random_pair(const ConverterConfig& config, Index prompt_frames, Index content_frames, Rng& rng);

struct ConverterGradCheck {
  GradCheckResult result;
  double loss = 0.0;
};

/// Full-model check of d l_total / d params on a seeded random pair.
ConverterGradCheck check_converter_gradient(const ConverterConfig& config, Index prompt_frames,
                                            Index content_frames, const LossConfig& loss, std::uint64_t seed,
                                            double step = 1e-5);

/// 2 blocks, hidden 8, 12 positions (4 prompt + 8 content), SSIM window 5.
struct TinyGradCheckSetup {
  ConverterConfig converter;
  Index prompt_frames = 4;
  Index content_frames = 8;
  LossConfig loss;
};
TinyGradCheckSetup tiny_grad_check_setup();

}  // namespace promptvc

#endif  // PROMPTVC_GRADCHECK_HPP
