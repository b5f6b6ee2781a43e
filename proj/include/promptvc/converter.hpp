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

#ifndef PROMPTVC_CONVERTER_HPP
#define PROMPTVC_CONVERTER_HPP

#include "promptvc/losses.hpp"
#include "promptvc/rng.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

namespace promptvc {

struct ConverterConfig {
  Index num_blocks = 4;
  Index hidden_dim = 32;
  Index ffn_dim = 64;
  /// 1-based block indices feeding the small, medium and large heads.
  /// Unset means ceil(num_blocks * (j + 1) / 3), i.e. 2/4/6 for six blocks.
  std::optional<std::array<Index, kNumTokenizers>> tap_layers;
  std::array<Index, kNumTokenizers> vocab_sizes{8, 16, 32};
  Index input_dim = 16;
  Index output_dim = 16;
  /// Rows of the learned position bias; longest accepted input.
  Index max_len = 512;
  /// Ablation switch: with attention off no information crosses positions.
  bool attention = true;
  /// Inverted dropout on both sublayer outputs; training only.
  double dropout = 0.0;

  std::array<Index, kNumTokenizers> taps() const;
  void validate() const;
};

/// Offset and shape of one parameter tensor inside the flat buffer.
struct ParamSlot {
  Index offset = 0;
  Index rows = 0;
  Index cols = 0;
  Index size() const { return rows * cols; }
};

struct BlockSlots {
  ParamSlot ln1_gain, ln1_bias, wq, wk, wv, wo;
  ParamSlot ln2_gain, ln2_bias, w1, b1, w2, b2;
};

/// Fixed parameter order; this is also the checkpoint payload order.
struct ParamLayout {
  ParamSlot in_w, in_b, pos_bias;
  std::vector<BlockSlots> blocks;
  ParamSlot out_ln_gain, out_ln_bias, out_w, out_b;
  std::array<ParamSlot, kNumTokenizers> head_w, head_b;
  Index total = 0;

  explicit ParamLayout(const ConverterConfig& config);
};

/// Pre-norm single-head transformer over prompt ++ content with three
/// intermediate token heads. Parameters live in one flat buffer.
class ConverterModel {
 public:
  explicit ConverterModel(ConverterConfig config);

  /// uniform(-a, a) with a = 1 / sqrt(fan_in) for weights and biases; layer
  /// norm gains 1 and biases 0.
  static ConverterModel initialized(const ConverterConfig& config, std::uint64_t seed);

  const ConverterConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  Eigen::Map<const RowMatrixXd> view(const ParamSlot& s) const {
    return {params_.data() + s.offset, s.rows, s.cols};
  }
  Eigen::Map<RowMatrixXd> view(const ParamSlot& s) { return {params_.data() + s.offset, s.rows, s.cols}; }

 private:
  ConverterConfig config_;
  ParamLayout layout_;
  Eigen::VectorXd params_;
};

struct LayerNormCache {
  RowMatrixXd normalized;
  Eigen::VectorXd inv_std;
};

struct BlockCache {
  RowMatrixXd input;
  LayerNormCache ln1;
  RowMatrixXd ln1_out, q, k, v;
  /// Row-stochastic attention weights, T x T.
  RowMatrixXd attn;
  RowMatrixXd context;
  RowMatrixXd attn_drop;
  RowMatrixXd mid;
  LayerNormCache ln2;
  RowMatrixXd ln2_out, pre_act, act;
  RowMatrixXd ffn_drop;
};

struct ForwardCache {
  RowMatrixXd input;
  std::vector<BlockCache> blocks;
  /// Residual stream after each block (index b holds block b + 1's output).
  std::vector<RowMatrixXd> block_out;
  LayerNormCache out_ln;
  RowMatrixXd out_ln_out;
};

struct ForwardResult {
  RowMatrixXd pred;
  HeadLogits logits;
  ForwardCache cache;
};

/// `dropout_rng` enables dropout when the config asks for it.
ForwardResult forward(const ConverterModel& model, const MatrixRef& input, Rng* dropout_rng = nullptr);

/// Gradient of the loss with respect to every parameter, in layout order.
Eigen::VectorXd backward(const ConverterModel& model, const ForwardCache& cache, const MatrixRef& d_pred,
                         const HeadLogits& d_logits);

struct OptimizerConfig {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  int steps = 2000;
  int batch_size = 1;
  std::uint64_t seed = 7;

  void validate() const;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::int64_t step = 0;
};

/// Adam with bias correction.
void adam_step(ConverterModel& model, const Eigen::VectorXd& grad, AdamState& state, const OptimizerConfig& opt);

void backward_and_step(ConverterModel& model, const ForwardCache& cache, const MatrixRef& d_pred,
                       const HeadLogits& d_logits, AdamState& state, const OptimizerConfig& opt);

// "VTM1" layout, little-endian:
//   magic[4] version:u32 num_blocks:u32 hidden_dim:u32 ffn_dim:u32
//   input_dim:u32 output_dim:u32 max_len:u32 taps:u32[3] vocab:u32[3]
//   attention:u32 param_count:u64 payload:f32[param_count]
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;
void write_checkpoint(const ConverterModel& model, const std::filesystem::path& path);
ConverterModel read_checkpoint(const std::filesystem::path& path);

}  // namespace promptvc

#endif  // PROMPTVC_CONVERTER_HPP
