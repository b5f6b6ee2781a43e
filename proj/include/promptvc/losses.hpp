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

#ifndef PROMPTVC_LOSSES_HPP
#define PROMPTVC_LOSSES_HPP

#include "promptvc/pair_sampler.hpp"

#include <array>
#include <optional>
#include <string>

namespace promptvc {

using MatrixRef = Eigen::Ref<const RowMatrixXd>;
using HeadLogits = std::array<RowMatrixXd, kNumTokenizers>;

/// A scalar loss and its gradient with respect to the prediction.
struct LossTerm {
  double value = 0.0;
  RowMatrixXd grad;
};

/// Mean of (pred - target)^2 over active rows and all channels.
LossTerm mse_loss(const MatrixRef& pred, const MatrixRef& target, const PositionMask& active);

struct SsimConfig {
  Index window = 9;
  /// Stabilizers; when unset they are (0.01 R)^2 and (0.03 R)^2 with R the
  /// target's value range over active rows (R = 1 if the target is constant).
  std::optional<double> c1;
  std::optional<double> c2;
};

/// 1 - mean SSIM, where SSIM is taken per channel over every length-`window`
/// run of consecutive active frames (uniform weights, population moments).
LossTerm ssim_loss(const MatrixRef& pred, const MatrixRef& target, const PositionMask& active,
                   const SsimConfig& config = {});

struct ProgressiveCe {
  std::array<double, kNumTokenizers> components{};
  HeadLogits grads;
};

/// Mean cross-entropy per head over active frames. Vocabulary widths must be
/// strictly increasing from the small head to the large one.
ProgressiveCe progressive_ce(const HeadLogits& logits, const std::array<TokenIds, kNumTokenizers>& ids,
                             const PositionMask& active);

struct LossReport {
  double l_mse = 0.0;
  double l_ssim = 0.0;
  double l_small = 0.0;
  double l_medium = 0.0;
  double l_large = 0.0;
  double l_pro = 0.0;
  double l_total = 0.0;
  PositionMask mask;

  static std::string tsv_header();
  /// Tab-separated component values in header order.
  std::string to_tsv() const;
};

struct LossConfig {
  SsimConfig ssim;
};

struct LossOutput {
  LossReport report;
  RowMatrixXd d_pred;
  HeadLogits d_logits;
};

/// Prompt-masked mask over converter_input positions.
PositionMask prompt_mask(const TrainingPair& pair);

/// L_total = L_mse + L_ssim + L_pro against the pair's target, with prompt
/// positions of the converter input excluded from every term.
LossOutput total_loss(const TrainingPair& pair, const MatrixRef& pred, const HeadLogits& logits,
                      const LossConfig& config = {});

}  // namespace promptvc

#endif  // PROMPTVC_LOSSES_HPP
