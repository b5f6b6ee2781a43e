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

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace promptvc;

namespace {

PositionMask all_active(Index n) { return PositionMask(static_cast<std::size_t>(n), true); }

PositionMask prefix_masked(Index n, Index masked) {
  PositionMask m = all_active(n);
  for (Index i = 0; i < masked; ++i) m[static_cast<std::size_t>(i)] = false;
  return m;
}

std::array<TokenIds, kNumTokenizers> random_ids(Index frames, const std::array<Index, kNumTokenizers>& vocab,
                                                Rng& rng) {
  std::array<TokenIds, kNumTokenizers> ids;
  for (std::size_t j = 0; j < kNumTokenizers; ++j)
    for (Index t = 0; t < frames; ++t)
      ids[j].push_back(static_cast<std::uint32_t>(rng.index(static_cast<std::uint64_t>(vocab[j]))));
  return ids;
}

HeadLogits random_logits(Index frames, const std::array<Index, kNumTokenizers>& vocab, Rng& rng) {
  HeadLogits logits;
  for (std::size_t j = 0; j < kNumTokenizers; ++j) logits[j] = oracle::random_matrix(frames, vocab[j], rng);
  return logits;
}

}  // namespace

TEST_CASE("MSE gradient matches finite differences") {
  Rng rng(1);
  const RowMatrixXd pred = oracle::random_matrix(12, 5, rng);
  const RowMatrixXd target = oracle::random_matrix(12, 5, rng);
  const PositionMask mask = prefix_masked(12, 3);
  const LossTerm term = mse_loss(pred, target, mask);
  const RowMatrixXd numeric =
      oracle::numeric_gradient([&](const RowMatrixXd& x) { return mse_loss(x, target, mask).value; }, pred);
  CHECK(oracle::max_relative_error(term.grad, numeric) < 1e-6);
}

TEST_CASE("MSE closed forms") {
  Rng rng(2);
  const RowMatrixXd target = oracle::random_matrix(10, 4, rng);
  const LossTerm zero = mse_loss(target, target, all_active(10));
  CHECK(zero.value == 0.0);
  CHECK(zero.grad.isZero(0.0));

  const RowMatrixXd shifted = target.array() + 1.0;
  const LossTerm one = mse_loss(shifted, target, all_active(10));
  CHECK(one.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((one.grad.array() - 2.0 / 40.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("SSIM gradient matches finite differences") {
  Rng rng(3);
  const RowMatrixXd pred = oracle::random_matrix(32, 4, rng);
  const RowMatrixXd target = oracle::random_matrix(32, 4, rng);
  SUBCASE("all active") {
    const LossTerm term = ssim_loss(pred, target, all_active(32));
    const RowMatrixXd numeric = oracle::numeric_gradient(
        [&](const RowMatrixXd& x) { return ssim_loss(x, target, all_active(32)).value; }, pred);
    CHECK(oracle::max_relative_error(term.grad, numeric) < 1e-5);
  }
  SUBCASE("prompt masked") {
    const PositionMask mask = prefix_masked(32, 10);
    const LossTerm term = ssim_loss(pred, target, mask);
    const RowMatrixXd numeric =
        oracle::numeric_gradient([&](const RowMatrixXd& x) { return ssim_loss(x, target, mask).value; }, pred);
    CHECK(oracle::max_relative_error(term.grad, numeric) < 1e-5);
    CHECK(term.grad.topRows(10).isZero(0.0));
  }
}

TEST_CASE("SSIM closed forms") {
  Rng rng(4);
  const RowMatrixXd target = oracle::random_matrix(32, 4, rng);
  CHECK(std::abs(ssim_loss(target, target, all_active(32)).value) < 1e-12);

  // Anti-correlation drives SSIM negative when every window is zero-mean: a
  // period-9 zero-sum pattern makes each 9-frame window's mean exactly 0.
  RowMatrixXd zero_mean(36, 3);
  for (Index c = 0; c < 3; ++c) {
    Eigen::VectorXd pattern = oracle::random_matrix(9, 1, rng);
    pattern.array() -= pattern.mean();
    for (Index t = 0; t < 36; ++t) zero_mean(t, c) = pattern[t % 9];
  }
  const RowMatrixXd negated = -zero_mean;
  const double anti = ssim_loss(negated, zero_mean, all_active(36)).value;
  CHECK(anti > 1.0);
  CHECK(anti <= 2.0);
}

TEST_CASE("SSIM needs at least one full active window") {
  Rng rng(5);
  const RowMatrixXd a = oracle::random_matrix(8, 2, rng);
  CHECK_THROWS_AS(ssim_loss(a, a, all_active(8)), Error);
  CHECK_THROWS_AS(ssim_loss(a, a, all_active(8), {.window = 0}), Error);
}

TEST_CASE("progressive cross-entropy gradient matches finite differences") {
  Rng rng(6);
  const std::array<Index, kNumTokenizers> vocab{8, 16, 32};
  const HeadLogits logits = random_logits(16, vocab, rng);
  const auto ids = random_ids(16, vocab, rng);
  const PositionMask mask = prefix_masked(16, 4);
  const ProgressiveCe ce = progressive_ce(logits, ids, mask);
  for (std::size_t j = 0; j < kNumTokenizers; ++j) {
    const RowMatrixXd numeric = oracle::numeric_gradient(
        [&](const RowMatrixXd& x) {
          HeadLogits l = logits;
          l[j] = x;
          return progressive_ce(l, ids, mask).components[j];
        },
        logits[j]);
    CHECK(oracle::max_relative_error(ce.grads[j], numeric) < 1e-6);
    CHECK(ce.grads[j].topRows(4).isZero(0.0));
  }
}

TEST_CASE("cross-entropy closed forms") {
  const std::array<Index, kNumTokenizers> vocab{3, 5, 32};
  Rng rng(7);
  const auto ids = random_ids(10, vocab, rng);
  HeadLogits uniform;
  HeadLogits confident;
  for (std::size_t j = 0; j < kNumTokenizers; ++j) {
    uniform[j] = RowMatrixXd::Zero(10, vocab[j]);
    confident[j] = RowMatrixXd::Zero(10, vocab[j]);
    for (Index t = 0; t < 10; ++t) confident[j](t, ids[j][static_cast<std::size_t>(t)]) = 20.0;
  }
  const ProgressiveCe u = progressive_ce(uniform, ids, all_active(10));
  const ProgressiveCe c = progressive_ce(confident, ids, all_active(10));
  for (std::size_t j = 0; j < kNumTokenizers; ++j) {
    const double v = static_cast<double>(vocab[j]);
    CHECK(std::abs(u.components[j] - std::log(v)) < 1e-9);
    // A +20 margin leaves log(1 + (V - 1) e^-20), below 1e-8 for V <= 5.
    CHECK(c.components[j] == doctest::Approx(std::log1p((v - 1.0) * std::exp(-20.0))).epsilon(1e-9));
    if (vocab[j] <= 5) CHECK(c.components[j] < 1e-8);
  }
}

TEST_CASE("loss argument errors") {
  Rng rng(8);
  const std::array<Index, kNumTokenizers> vocab{2, 3, 4};
  const HeadLogits logits = random_logits(5, vocab, rng);
  auto ids = random_ids(5, vocab, rng);
  CHECK_THROWS_AS(progressive_ce(logits, ids, PositionMask(5, false)), Error);
  ids[1][2] = 3;
  CHECK_THROWS_AS(progressive_ce(logits, ids, all_active(5)), Error);
  const RowMatrixXd a = oracle::random_matrix(5, 2, rng);
  const RowMatrixXd b = oracle::random_matrix(4, 2, rng);
  CHECK_THROWS_AS(mse_loss(a, b, all_active(5)), Error);
  CHECK_THROWS_AS(mse_loss(a, a, all_active(4)), Error);
  CHECK_THROWS_AS(mse_loss(a, a, PositionMask(5, false)), Error);
}

namespace {

TrainingPair synthetic_pair(Index p, Index t, Index dim, const std::array<Index, kNumTokenizers>& vocab, Rng& rng) {
  TrainingPair pair;
  pair.target = FeatureMatrix(oracle::random_matrix_f(t, dim, rng));
  pair.content = FeatureMatrix(oracle::random_matrix_f(t, dim, rng));
  pair.prompt_start = 2;
  pair.prompt = slice_frames(pair.target, pair.prompt_start, p);
  pair.converter_input = concat_frames(pair.prompt, pair.content);
  pair.target_ids = random_ids(t, vocab, rng);
  return pair;
}

}  // namespace

TEST_CASE("total loss is the exact sum of independently computed terms") {
  Rng rng(9);
  const std::array<Index, kNumTokenizers> vocab{8, 16, 32};
  const Index p = 6, t = 20, dim = 3;
  const TrainingPair pair = synthetic_pair(p, t, dim, vocab, rng);
  const RowMatrixXd pred = oracle::random_matrix(p + t, dim, rng);
  const HeadLogits logits = random_logits(p + t, vocab, rng);

  const LossOutput out = total_loss(pair, pred, logits);
  const LossReport& r = out.report;
  CHECK(r.l_pro == r.l_small + r.l_medium + r.l_large);
  CHECK(r.l_total == r.l_mse + r.l_ssim + r.l_pro);

  const RowMatrixXd content_pred = pred.bottomRows(t);
  const RowMatrixXd content_target = pair.target.data().cast<double>();
  CHECK(r.l_mse == doctest::Approx(mse_loss(content_pred, content_target, all_active(t)).value).epsilon(1e-12));
  CHECK(r.l_ssim == doctest::Approx(ssim_loss(content_pred, content_target, all_active(t)).value).epsilon(1e-12));
  HeadLogits content_logits;
  for (std::size_t j = 0; j < kNumTokenizers; ++j) content_logits[j] = logits[j].bottomRows(t);
  const ProgressiveCe ce = progressive_ce(content_logits, pair.target_ids, all_active(t));
  CHECK(r.l_small == doctest::Approx(ce.components[0]).epsilon(1e-12));
  CHECK(r.l_medium == doctest::Approx(ce.components[1]).epsilon(1e-12));
  CHECK(r.l_large == doctest::Approx(ce.components[2]).epsilon(1e-12));

  CHECK(out.d_pred.topRows(p).isZero(0.0));
  for (std::size_t j = 0; j < kNumTokenizers; ++j) CHECK(out.d_logits[j].topRows(p).isZero(0.0));
  CHECK(std::count(r.mask.begin(), r.mask.end(), false) == p);
}

TEST_CASE("prompt rows do not influence the total loss") {
  Rng rng(10);
  const std::array<Index, kNumTokenizers> vocab{4, 5, 6};
  const Index p = 5, t = 15;
  const TrainingPair pair = synthetic_pair(p, t, 2, vocab, rng);
  RowMatrixXd pred = oracle::random_matrix(p + t, 2, rng);
  HeadLogits logits = random_logits(p + t, vocab, rng);
  const double before = total_loss(pair, pred, logits).report.l_total;
  pred.topRows(p).setConstant(1e3);
  for (auto& l : logits) l.topRows(p).setConstant(-7.0);
  CHECK(total_loss(pair, pred, logits).report.l_total == before);
}

TEST_CASE("perfect prediction drives the total loss to zero") {
  Rng rng(11);
  const std::array<Index, kNumTokenizers> vocab{4, 5, 6};
  const Index p = 4, t = 12;
  const TrainingPair pair = synthetic_pair(p, t, 3, vocab, rng);
  const RowMatrixXd pred = pair.converter_input.data().cast<double>().eval();
  RowMatrixXd exact(p + t, 3);
  exact.topRows(p) = pred.topRows(p);
  exact.bottomRows(t) = pair.target.data().cast<double>();
  HeadLogits logits;
  for (std::size_t j = 0; j < kNumTokenizers; ++j) {
    logits[j] = RowMatrixXd::Zero(p + t, vocab[j]);
    for (Index i = 0; i < t; ++i) logits[j](p + i, pair.target_ids[j][static_cast<std::size_t>(i)]) = 30.0;
  }
  CHECK(total_loss(pair, exact, logits).report.l_total < 1e-6);
}

TEST_CASE("loss report serializes as tab-separated values") {
  LossReport r{.l_mse = 1, .l_ssim = 2, .l_small = 3, .l_medium = 4, .l_large = 5, .l_pro = 12, .l_total = 15};
  const std::string header = LossReport::tsv_header();
  const std::string row = r.to_tsv();
  CHECK(std::count(header.begin(), header.end(), '\t') == std::count(row.begin(), row.end(), '\t'));
  CHECK(header.find("l_total") != std::string::npos);
  std::istringstream in(row);
  std::vector<double> values;
  for (double v; in >> v;) values.push_back(v);
  CHECK(values.back() == 15.0);
}
