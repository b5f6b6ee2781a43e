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

#include "promptvc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace promptvc {
namespace {

Index count_active(const PositionMask& active) {
  return static_cast<Index>(std::count(active.begin(), active.end(), true));
}

void check_mask(const PositionMask& active, Index rows, const char* who) {
  if (static_cast<Index>(active.size()) != rows)
    throw Error(Errc::dimension_mismatch, std::string(who) + ": mask length differs from sequence length");
  if (count_active(active) == 0) throw Error(Errc::invalid_argument, std::string(who) + ": all positions masked");
}

void check_same_shape(const MatrixRef& a, const MatrixRef& b, const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(Errc::dimension_mismatch, std::string(who) + ": prediction and target shapes differ");
}

}  // namespace

LossTerm mse_loss(const MatrixRef& pred, const MatrixRef& target, const PositionMask& active) {
  check_same_shape(pred, target, "mse_loss");
  check_mask(active, pred.rows(), "mse_loss");
  const double count = static_cast<double>(count_active(active) * pred.cols());
  LossTerm out;
  out.grad = RowMatrixXd::Zero(pred.rows(), pred.cols());
  double sum = 0.0;
  for (Index t = 0; t < pred.rows(); ++t) {
    if (!active[static_cast<std::size_t>(t)]) continue;
    const Eigen::RowVectorXd diff = pred.row(t) - target.row(t);
    sum += diff.squaredNorm();
    out.grad.row(t) = (2.0 / count) * diff;
  }
  out.value = sum / count;
  return out;
}

LossTerm ssim_loss(const MatrixRef& pred, const MatrixRef& target, const PositionMask& active,
                   const SsimConfig& config) {
  check_same_shape(pred, target, "ssim_loss");
  check_mask(active, pred.rows(), "ssim_loss");
  const Index w = config.window;
  if (w < 1) throw Error(Errc::invalid_argument, "ssim_loss: window must be >= 1");

  // Window starts whose whole span is active.
  std::vector<Index> starts;
  Index run = 0;
  for (Index t = 0; t < pred.rows(); ++t) {
    run = active[static_cast<std::size_t>(t)] ? run + 1 : 0;
    if (run >= w) starts.push_back(t - w + 1);
  }
  if (starts.empty())
    throw Error(Errc::invalid_argument, "ssim_loss: no active span of " + std::to_string(w) + " frames");

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (Index t = 0; t < target.rows(); ++t) {
    if (!active[static_cast<std::size_t>(t)]) continue;
    lo = std::min(lo, target.row(t).minCoeff());
    hi = std::max(hi, target.row(t).maxCoeff());
  }
  const double range = hi > lo ? hi - lo : 1.0;
  const double c1 = config.c1.value_or((0.01 * range) * (0.01 * range));
  const double c2 = config.c2.value_or((0.03 * range) * (0.03 * range));

  const Index dim = pred.cols();
  const double inv_w = 1.0 / static_cast<double>(w);
  const double n_terms = static_cast<double>(starts.size()) * static_cast<double>(dim);

  LossTerm out;
  out.grad = RowMatrixXd::Zero(pred.rows(), dim);
  double ssim_sum = 0.0;
  for (const Index s : starts) {
    for (Index c = 0; c < dim; ++c) {
      const auto x = pred.col(c).segment(s, w);
      const auto y = target.col(c).segment(s, w);
      const double mx = x.mean();
      const double my = y.mean();
      const double vx = (x.array() - mx).square().mean();
      const double vy = (y.array() - my).square().mean();
      const double cxy = ((x.array() - mx) * (y.array() - my)).mean();
      const double a1 = 2.0 * mx * my + c1;
      const double a2 = 2.0 * cxy + c2;
      const double b1 = mx * mx + my * my + c1;
      const double b2 = vx + vy + c2;
      const double ssim = (a1 * a2) / (b1 * b2);
      ssim_sum += ssim;
      // d ssim / d x_i, pushed through loss = 1 - mean(ssim).
      for (Index i = 0; i < w; ++i) {
        const double da1 = 2.0 * my * inv_w;
        const double da2 = 2.0 * (y[i] - my) * inv_w;
        const double db1 = 2.0 * mx * inv_w;
        const double db2 = 2.0 * (x[i] - mx) * inv_w;
        const double d = (da1 * a2 + a1 * da2) / (b1 * b2) - ssim * (db1 / b1 + db2 / b2);
        out.grad(s + i, c) -= d / n_terms;
      }
    }
  }
  out.value = 1.0 - ssim_sum / n_terms;
  return out;
}

ProgressiveCe progressive_ce(const HeadLogits& logits, const std::array<TokenIds, kNumTokenizers>& ids,
                             const PositionMask& active) {
  for (std::size_t j = 1; j < kNumTokenizers; ++j) {
    if (logits[j].cols() <= logits[j - 1].cols())
      throw Error(Errc::invalid_argument, "progressive_ce: vocabulary sizes must be strictly increasing");
  }
  ProgressiveCe out;
  for (std::size_t j = 0; j < kNumTokenizers; ++j) {
    const RowMatrixXd& z = logits[j];
    check_mask(active, z.rows(), "progressive_ce");
    if (static_cast<Index>(ids[j].size()) != z.rows())
      throw Error(Errc::dimension_mismatch, "progressive_ce: id sequence length differs from logits");
    const double count = static_cast<double>(count_active(active));
    const Index vocab = z.cols();
    out.grads[j] = RowMatrixXd::Zero(z.rows(), vocab);
    double sum = 0.0;
    for (Index t = 0; t < z.rows(); ++t) {
      if (!active[static_cast<std::size_t>(t)]) continue;
      const auto id = static_cast<Index>(ids[j][static_cast<std::size_t>(t)]);
      if (id >= vocab)
        throw Error(Errc::out_of_range, "progressive_ce: token id " + std::to_string(id) +
                                            " outside vocabulary of " + std::to_string(vocab));
      const double zmax = z.row(t).maxCoeff();
      const Eigen::RowVectorXd e = (z.row(t).array() - zmax).exp().matrix();
      const double denom = e.sum();
      sum += std::log(denom) - (z(t, id) - zmax);
      out.grads[j].row(t) = e / (denom * count);
      out.grads[j](t, id) -= 1.0 / count;
    }
    out.components[j] = sum / count;
  }
  return out;
}

std::string LossReport::tsv_header() {
  return "l_mse\tl_ssim\tl_small\tl_medium\tl_large\tl_pro\tl_total";
}

std::string LossReport::to_tsv() const {
  std::ostringstream os;
  os << std::setprecision(9) << l_mse << '\t' << l_ssim << '\t' << l_small << '\t' << l_medium << '\t'
     << l_large << '\t' << l_pro << '\t' << l_total;
  return os.str();
}

PositionMask prompt_mask(const TrainingPair& pair) {
  PositionMask mask(static_cast<std::size_t>(pair.converter_input.frames()), true);
  std::fill(mask.begin(), mask.begin() + pair.prompt_frames(), false);
  return mask;
}

LossOutput total_loss(const TrainingPair& pair, const MatrixRef& pred, const HeadLogits& logits,
                      const LossConfig& config) {
  const Index p = pair.prompt_frames();
  const Index rows = pair.converter_input.frames();
  if (pred.rows() != rows || pred.cols() != pair.target.dim())
    throw Error(Errc::dimension_mismatch, "total_loss: prediction shape differs from converter input");
  if (pair.target.frames() != rows - p)
    throw Error(Errc::dimension_mismatch, "total_loss: target length differs from content length");

  // Prompt rows are placeholders; the mask keeps them out of every term.
  RowMatrixXd target(rows, pair.target.dim());
  target.topRows(p) = pair.prompt.data().cast<double>();
  target.bottomRows(rows - p) = pair.target.data().cast<double>();
  std::array<TokenIds, kNumTokenizers> ids;
  for (std::size_t j = 0; j < kNumTokenizers; ++j) {
    ids[j].assign(static_cast<std::size_t>(p), 0u);
    ids[j].insert(ids[j].end(), pair.target_ids[j].begin(), pair.target_ids[j].end());
  }

  LossOutput out;
  out.report.mask = prompt_mask(pair);
  LossTerm mse = mse_loss(pred, target, out.report.mask);
  LossTerm ssim = ssim_loss(pred, target, out.report.mask, config.ssim);
  ProgressiveCe ce = progressive_ce(logits, ids, out.report.mask);

  LossReport& r = out.report;
  r.l_mse = mse.value;
  r.l_ssim = ssim.value;
  r.l_small = ce.components[0];
  r.l_medium = ce.components[1];
  r.l_large = ce.components[2];
  r.l_pro = r.l_small + r.l_medium + r.l_large;
  r.l_total = r.l_mse + r.l_ssim + r.l_pro;

  out.d_pred = mse.grad + ssim.grad;
  out.d_logits = std::move(ce.grads);
  return out;
}

}  // namespace promptvc
