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

#include "promptvc/converter.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace promptvc {
namespace {

constexpr double kLayerNormEps = 1e-5;

RowMatrixXd layer_norm(const RowMatrixXd& x, const Eigen::Map<const RowMatrixXd>& gain,
                       const Eigen::Map<const RowMatrixXd>& bias, LayerNormCache& cache) {
  const Index n = x.rows();
  const double inv_d = 1.0 / static_cast<double>(x.cols());
  cache.normalized.resize(n, x.cols());
  cache.inv_std.resize(n);
  for (Index t = 0; t < n; ++t) {
    const double mean = x.row(t).sum() * inv_d;
    const Eigen::RowVectorXd centered = x.row(t).array() - mean;
    const double var = centered.squaredNorm() * inv_d;
    cache.inv_std[t] = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.normalized.row(t) = centered * cache.inv_std[t];
  }
  RowMatrixXd y = cache.normalized;
  y.array().rowwise() *= gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

RowMatrixXd layer_norm_backward(const RowMatrixXd& dy, const LayerNormCache& cache,
                                const Eigen::Map<const RowMatrixXd>& gain, Eigen::Map<RowMatrixXd> d_gain,
                                Eigen::Map<RowMatrixXd> d_bias) {
  d_gain.row(0) += (dy.array() * cache.normalized.array()).colwise().sum().matrix();
  d_bias.row(0) += dy.colwise().sum();
  RowMatrixXd dxhat = dy;
  dxhat.array().rowwise() *= gain.row(0).array();
  const double inv_d = 1.0 / static_cast<double>(dy.cols());
  RowMatrixXd dx(dy.rows(), dy.cols());
  for (Index t = 0; t < dy.rows(); ++t) {
    const double mean_d = dxhat.row(t).sum() * inv_d;
    const double mean_dx = dxhat.row(t).dot(cache.normalized.row(t)) * inv_d;
    dx.row(t) = cache.inv_std[t] *
                (dxhat.row(t).array() - mean_d - cache.normalized.row(t).array() * mean_dx).matrix();
  }
  return dx;
}

constexpr double kGeluC = 0.044715;
const double kGeluScale = std::sqrt(2.0 / std::numbers::pi);

double gelu(double z) { return 0.5 * z * (1.0 + std::tanh(kGeluScale * (z + kGeluC * z * z * z))); }

double gelu_grad(double z) {
  const double th = std::tanh(kGeluScale * (z + kGeluC * z * z * z));
  return 0.5 * (1.0 + th) + 0.5 * z * (1.0 - th * th) * kGeluScale * (1.0 + 3.0 * kGeluC * z * z);
}

void softmax_rows(RowMatrixXd& s) {
  for (Index t = 0; t < s.rows(); ++t) {
    const double m = s.row(t).maxCoeff();
    s.row(t) = (s.row(t).array() - m).exp().matrix();
    s.row(t) /= s.row(t).sum();
  }
}

// Inverted-dropout mask (entries 0 or 1 / (1 - p)); empty when disabled.
RowMatrixXd dropout_mask(Index rows, Index cols, double p, Rng* rng) {
  if (rng == nullptr || p <= 0.0) return {};
  RowMatrixXd mask(rows, cols);
  const double keep = 1.0 / (1.0 - p);
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng->uniform() < p ? 0.0 : keep;
  return mask;
}

void uniform_fill(Eigen::Map<RowMatrixXd> m, double bound, Rng& rng) {
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * rng.uniform() - 1.0) * bound;
}

}  // namespace

std::array<Index, kNumTokenizers> ConverterConfig::taps() const {
  if (tap_layers) return *tap_layers;
  std::array<Index, kNumTokenizers> out{};
  for (std::size_t j = 0; j < kNumTokenizers; ++j) {
    const Index num = num_blocks * static_cast<Index>(j + 1);
    out[j] = (num + 2) / 3;
  }
  return out;
}

void ConverterConfig::validate() const {
  if (num_blocks < 1 || hidden_dim < 1 || ffn_dim < 1 || input_dim < 1 || output_dim < 1 || max_len < 1)
    throw Error(Errc::invalid_argument, "ConverterConfig: sizes must be positive");
  const auto t = taps();
  for (std::size_t j = 0; j < kNumTokenizers; ++j) {
    if (t[j] < 1 || t[j] > num_blocks)
      throw Error(Errc::invalid_argument, "ConverterConfig: tap layer outside [1, num_blocks]");
    if (j > 0 && t[j] < t[j - 1]) throw Error(Errc::invalid_argument, "ConverterConfig: tap layers must be sorted");
    // Uniqueness needs at least three blocks; smaller models share taps.
    if (j > 0 && num_blocks >= 3 && t[j] == t[j - 1])
      throw Error(Errc::invalid_argument, "ConverterConfig: tap layers must be unique");
    if (vocab_sizes[j] < 1 || (j > 0 && vocab_sizes[j] <= vocab_sizes[j - 1]))
      throw Error(Errc::invalid_argument, "ConverterConfig: vocab sizes must be strictly increasing");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(Errc::invalid_argument, "ConverterConfig: dropout in [0, 1)");
}

ParamLayout::ParamLayout(const ConverterConfig& c) {
  const auto slot = [this](Index rows, Index cols) {
    ParamSlot s{total, rows, cols};
    total += rows * cols;
    return s;
  };
  const Index h = c.hidden_dim;
  in_w = slot(c.input_dim, h);
  in_b = slot(1, h);
  pos_bias = slot(c.max_len, h);
  blocks.resize(static_cast<std::size_t>(c.num_blocks));
  for (auto& b : blocks) {
    b.ln1_gain = slot(1, h);
    b.ln1_bias = slot(1, h);
    b.wq = slot(h, h);
    b.wk = slot(h, h);
    b.wv = slot(h, h);
    b.wo = slot(h, h);
    b.ln2_gain = slot(1, h);
    b.ln2_bias = slot(1, h);
    b.w1 = slot(h, c.ffn_dim);
    b.b1 = slot(1, c.ffn_dim);
    b.w2 = slot(c.ffn_dim, h);
    b.b2 = slot(1, h);
  }
  out_ln_gain = slot(1, h);
  out_ln_bias = slot(1, h);
  out_w = slot(h, c.output_dim);
  out_b = slot(1, c.output_dim);
  for (std::size_t j = 0; j < kNumTokenizers; ++j) {
    head_w[j] = slot(h, c.vocab_sizes[j]);
    head_b[j] = slot(1, c.vocab_sizes[j]);
  }
}

ConverterModel::ConverterModel(ConverterConfig config)
    : config_((config.validate(), std::move(config))),
      layout_(config_),
      params_(Eigen::VectorXd::Zero(layout_.total)) {}

ConverterModel ConverterModel::initialized(const ConverterConfig& config, std::uint64_t seed) {
  ConverterModel model(config);
  Rng rng(seed);
  const ParamLayout& l = model.layout_;
  const auto init = [&](const ParamSlot& s, Index fan_in) {
    uniform_fill(model.view(s), 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
  };
  const Index h = config.hidden_dim;
  init(l.in_w, config.input_dim);
  init(l.in_b, config.input_dim);
  init(l.pos_bias, h);
  for (const auto& b : l.blocks) {
    model.view(b.ln1_gain).setOnes();
    init(b.wq, h);
    init(b.wk, h);
    init(b.wv, h);
    init(b.wo, h);
    model.view(b.ln2_gain).setOnes();
    init(b.w1, h);
    init(b.b1, h);
    init(b.w2, config.ffn_dim);
    init(b.b2, config.ffn_dim);
  }
  model.view(l.out_ln_gain).setOnes();
  init(l.out_w, h);
  init(l.out_b, h);
  for (std::size_t j = 0; j < kNumTokenizers; ++j) {
    init(l.head_w[j], h);
    init(l.head_b[j], h);
  }
  return model;
}

ForwardResult forward(const ConverterModel& model, const MatrixRef& input, Rng* dropout_rng) {
  const ConverterConfig& cfg = model.config();
  const ParamLayout& l = model.layout();
  const Index n = input.rows();
  if (input.cols() != cfg.input_dim)
    throw Error(Errc::dimension_mismatch, "converter forward: input dim " + std::to_string(input.cols()) +
                                              " vs model input dim " + std::to_string(cfg.input_dim));
  if (n < 1 || n > cfg.max_len)
    throw Error(Errc::out_of_range, "converter forward: length " + std::to_string(n) + " outside [1, " +
                                        std::to_string(cfg.max_len) + "]");

  ForwardResult out;
  ForwardCache& cache = out.cache;
  cache.input = input;
  RowMatrixXd h = input * model.view(l.in_w);
  h.rowwise() += model.view(l.in_b).row(0);
  h += model.view(l.pos_bias).topRows(n);

  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim));
  cache.blocks.resize(static_cast<std::size_t>(cfg.num_blocks));
  cache.block_out.resize(static_cast<std::size_t>(cfg.num_blocks));
  for (Index b = 0; b < cfg.num_blocks; ++b) {
    const BlockSlots& s = l.blocks[static_cast<std::size_t>(b)];
    BlockCache& c = cache.blocks[static_cast<std::size_t>(b)];
    c.input = h;
    c.mid = h;
    if (cfg.attention) {
      c.ln1_out = layer_norm(h, model.view(s.ln1_gain), model.view(s.ln1_bias), c.ln1);
      c.q.noalias() = c.ln1_out * model.view(s.wq);
      c.k.noalias() = c.ln1_out * model.view(s.wk);
      c.v.noalias() = c.ln1_out * model.view(s.wv);
      c.attn.noalias() = scale * (c.q * c.k.transpose());
      softmax_rows(c.attn);
      c.context.noalias() = c.attn * c.v;
      RowMatrixXd attn_out = c.context * model.view(s.wo);
      c.attn_drop = dropout_mask(n, cfg.hidden_dim, cfg.dropout, dropout_rng);
      if (c.attn_drop.size() != 0) attn_out.array() *= c.attn_drop.array();
      c.mid += attn_out;
    }
    c.ln2_out = layer_norm(c.mid, model.view(s.ln2_gain), model.view(s.ln2_bias), c.ln2);
    c.pre_act.noalias() = c.ln2_out * model.view(s.w1);
    c.pre_act.rowwise() += model.view(s.b1).row(0);
    c.act = c.pre_act.unaryExpr([](double z) { return gelu(z); });
    RowMatrixXd ffn_out = c.act * model.view(s.w2);
    ffn_out.rowwise() += model.view(s.b2).row(0);
    c.ffn_drop = dropout_mask(n, cfg.hidden_dim, cfg.dropout, dropout_rng);
    if (c.ffn_drop.size() != 0) ffn_out.array() *= c.ffn_drop.array();
    h = c.mid + ffn_out;
    cache.block_out[static_cast<std::size_t>(b)] = h;
  }

  const auto taps = cfg.taps();
  for (std::size_t j = 0; j < kNumTokenizers; ++j) {
    out.logits[j] = cache.block_out[static_cast<std::size_t>(taps[j] - 1)] * model.view(l.head_w[j]);
    out.logits[j].rowwise() += model.view(l.head_b[j]).row(0);
  }
  cache.out_ln_out = layer_norm(h, model.view(l.out_ln_gain), model.view(l.out_ln_bias), cache.out_ln);
  out.pred = cache.out_ln_out * model.view(l.out_w);
  out.pred.rowwise() += model.view(l.out_b).row(0);
  return out;
}

Eigen::VectorXd backward(const ConverterModel& model, const ForwardCache& cache, const MatrixRef& d_pred,
                         const HeadLogits& d_logits) {
  const ConverterConfig& cfg = model.config();
  const ParamLayout& l = model.layout();
  const Index n = cache.input.rows();
  if (static_cast<Index>(cache.blocks.size()) != cfg.num_blocks)
    throw Error(Errc::dimension_mismatch, "converter backward: cache does not match model");
  if (d_pred.rows() != n || d_pred.cols() != cfg.output_dim)
    throw Error(Errc::dimension_mismatch, "converter backward: prediction gradient shape differs from cache");
  for (std::size_t j = 0; j < kNumTokenizers; ++j) {
    if (d_logits[j].rows() != n || d_logits[j].cols() != cfg.vocab_sizes[j])
      throw Error(Errc::dimension_mismatch, "converter backward: logit gradient shape differs from cache");
  }

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(l.total);
  const auto g = [&grad](const ParamSlot& s) { return Eigen::Map<RowMatrixXd>(grad.data() + s.offset, s.rows, s.cols); };
  const auto w = [&model](const ParamSlot& s) { return model.view(s); };

  g(l.out_w).noalias() += cache.out_ln_out.transpose() * d_pred;
  g(l.out_b).row(0) += d_pred.colwise().sum();
  RowMatrixXd dh = layer_norm_backward(d_pred * w(l.out_w).transpose(), cache.out_ln, w(l.out_ln_gain),
                                       g(l.out_ln_gain), g(l.out_ln_bias));

  const auto taps = cfg.taps();
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim));
  for (Index b = cfg.num_blocks - 1; b >= 0; --b) {
    for (std::size_t j = 0; j < kNumTokenizers; ++j) {
      if (taps[j] - 1 != b) continue;
      g(l.head_w[j]).noalias() += cache.block_out[static_cast<std::size_t>(b)].transpose() * d_logits[j];
      g(l.head_b[j]).row(0) += d_logits[j].colwise().sum();
      dh.noalias() += d_logits[j] * w(l.head_w[j]).transpose();
    }
    const BlockSlots& s = l.blocks[static_cast<std::size_t>(b)];
    const BlockCache& c = cache.blocks[static_cast<std::size_t>(b)];

    // Feed-forward sublayer.
    RowMatrixXd d_ffn = dh;
    if (c.ffn_drop.size() != 0) d_ffn.array() *= c.ffn_drop.array();
    g(s.w2).noalias() += c.act.transpose() * d_ffn;
    g(s.b2).row(0) += d_ffn.colwise().sum();
    RowMatrixXd d_pre = d_ffn * w(s.w2).transpose();
    d_pre.array() *= c.pre_act.unaryExpr([](double z) { return gelu_grad(z); }).array();
    g(s.w1).noalias() += c.ln2_out.transpose() * d_pre;
    g(s.b1).row(0) += d_pre.colwise().sum();
    dh += layer_norm_backward(d_pre * w(s.w1).transpose(), c.ln2, w(s.ln2_gain), g(s.ln2_gain), g(s.ln2_bias));

    // Attention sublayer.
    if (cfg.attention) {
      RowMatrixXd d_attn = dh;
      if (c.attn_drop.size() != 0) d_attn.array() *= c.attn_drop.array();
      g(s.wo).noalias() += c.context.transpose() * d_attn;
      const RowMatrixXd d_context = d_attn * w(s.wo).transpose();
      const RowMatrixXd d_weights = d_context * c.v.transpose();
      const RowMatrixXd d_v = c.attn.transpose() * d_context;
      RowMatrixXd d_scores(n, n);
      for (Index t = 0; t < n; ++t) {
        const double dot = d_weights.row(t).dot(c.attn.row(t));
        d_scores.row(t) = (c.attn.row(t).array() * (d_weights.row(t).array() - dot)).matrix();
      }
      const RowMatrixXd d_q = scale * (d_scores * c.k);
      const RowMatrixXd d_k = scale * (d_scores.transpose() * c.q);
      g(s.wq).noalias() += c.ln1_out.transpose() * d_q;
      g(s.wk).noalias() += c.ln1_out.transpose() * d_k;
      g(s.wv).noalias() += c.ln1_out.transpose() * d_v;
      RowMatrixXd d_ln1 = d_q * w(s.wq).transpose();
      d_ln1.noalias() += d_k * w(s.wk).transpose();
      d_ln1.noalias() += d_v * w(s.wv).transpose();
      dh += layer_norm_backward(d_ln1, c.ln1, w(s.ln1_gain), g(s.ln1_gain), g(s.ln1_bias));
    }
  }

  g(l.in_w).noalias() += cache.input.transpose() * dh;
  g(l.in_b).row(0) += dh.colwise().sum();
  g(l.pos_bias).topRows(n) += dh;
  return grad;
}

void OptimizerConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw Error(Errc::invalid_argument, "OptimizerConfig: learning_rate must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw Error(Errc::invalid_argument, "OptimizerConfig: betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw Error(Errc::invalid_argument, "OptimizerConfig: eps must be positive");
  if (steps < 0 || batch_size < 1) throw Error(Errc::invalid_argument, "OptimizerConfig: steps >= 0, batch_size >= 1");
}

void adam_step(ConverterModel& model, const Eigen::VectorXd& grad, AdamState& state, const OptimizerConfig& opt) {
  const Index n = model.params().size();
  if (grad.size() != n) throw Error(Errc::dimension_mismatch, "adam_step: gradient size differs from parameters");
  if (state.m.size() == 0) {
    state.m = Eigen::VectorXd::Zero(n);
    state.v = Eigen::VectorXd::Zero(n);
    state.step = 0;
  }
  if (state.m.size() != n || state.v.size() != n)
    throw Error(Errc::dimension_mismatch, "adam_step: optimizer state size differs from parameters");
  ++state.step;
  state.m = opt.beta1 * state.m + (1.0 - opt.beta1) * grad;
  state.v = opt.beta2 * state.v + (1.0 - opt.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  model.params().array() -=
      opt.learning_rate * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + opt.eps);
}

void backward_and_step(ConverterModel& model, const ForwardCache& cache, const MatrixRef& d_pred,
                       const HeadLogits& d_logits, AdamState& state, const OptimizerConfig& opt) {
  adam_step(model, backward(model, cache, d_pred, d_logits), state, opt);
}

void write_checkpoint(const ConverterModel& model, const std::filesystem::path& path) {
  const ConverterConfig& c = model.config();
  if (!model.params().allFinite()) throw Error(Errc::non_finite, "write_checkpoint: non-finite parameters");
  detail::BinaryWriter out(path);
  out.magic("VTM1");
  out.put<std::uint32_t>(kCheckpointFormatVersion);
  for (Index v : {c.num_blocks, c.hidden_dim, c.ffn_dim, c.input_dim, c.output_dim, c.max_len})
    out.put<std::uint32_t>(static_cast<std::uint32_t>(v));
  for (Index t : c.taps()) out.put<std::uint32_t>(static_cast<std::uint32_t>(t));
  for (Index v : c.vocab_sizes) out.put<std::uint32_t>(static_cast<std::uint32_t>(v));
  out.put<std::uint32_t>(c.attention ? 1u : 0u);
  out.put<std::uint64_t>(static_cast<std::uint64_t>(model.params().size()));
  out.put_f32_payload(model.params());
  out.finish();
}

ConverterModel read_checkpoint(const std::filesystem::path& path) {
  detail::BinaryReader in(path);
  in.expect_magic("VTM1");
  in.expect_version(kCheckpointFormatVersion);
  ConverterConfig c;
  const auto next = [&in] { return static_cast<Index>(in.get<std::uint32_t>()); };
  c.num_blocks = next();
  c.hidden_dim = next();
  c.ffn_dim = next();
  c.input_dim = next();
  c.output_dim = next();
  c.max_len = next();
  std::array<Index, kNumTokenizers> taps{};
  for (auto& t : taps) t = next();
  c.tap_layers = taps;
  for (auto& v : c.vocab_sizes) v = next();
  const auto attention = in.get<std::uint32_t>();
  if (attention > 1) throw Error(Errc::invalid_argument, "VTM attention flag must be 0 or 1: " + path.string());
  c.attention = attention == 1;
  ConverterModel model(c);
  const auto count = in.get<std::uint64_t>();
  if (count != static_cast<std::uint64_t>(model.params().size()))
    throw Error(Errc::invalid_argument, "VTM parameter count disagrees with its config: " + path.string());
  const RowMatrixXf payload = in.get_f32_payload(count, 1);
  if (!payload.allFinite()) throw Error(Errc::non_finite, "VTM payload has non-finite values: " + path.string());
  model.params() = payload.col(0).cast<double>();
  return model;
}

}  // namespace promptvc
