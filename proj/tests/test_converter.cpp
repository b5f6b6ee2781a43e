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
#include "promptvc/gradcheck.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

namespace fs = std::filesystem;
using namespace promptvc;
using namespace promptvc::testing;

namespace {

ConverterConfig small_config() {
  return {.num_blocks = 3,
          .hidden_dim = 8,
          .ffn_dim = 12,
          .vocab_sizes = {3, 5, 7},
          .input_dim = 4,
          .output_dim = 4,
          .max_len = 40};
}

}  // namespace

TEST_CASE("default taps spread over the depth") {
  ConverterConfig cfg;
  cfg.num_blocks = 6;
  CHECK(cfg.taps() == std::array<Index, 3>{2, 4, 6});
  cfg.num_blocks = 4;
  CHECK(cfg.taps() == std::array<Index, 3>{2, 3, 4});
  cfg.num_blocks = 1;
  CHECK(cfg.taps() == std::array<Index, 3>{1, 1, 1});
}

TEST_CASE("config validation") {
  ConverterConfig cfg = small_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.tap_layers = std::array<Index, 3>{1, 1, 3};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.tap_layers = std::array<Index, 3>{1, 2, 4};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.tap_layers = std::array<Index, 3>{0, 2, 3};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = small_config();
  cfg.hidden_dim = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = small_config();
  cfg.dropout = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("parameter layout is contiguous in the documented order") {
  const ConverterConfig cfg = small_config();
  const ParamLayout layout(cfg);
  CHECK(layout.in_w.offset == 0);
  CHECK(layout.in_b.offset == layout.in_w.size());
  CHECK(layout.pos_bias.offset == layout.in_b.offset + layout.in_b.size());
  CHECK(layout.blocks.front().ln1_gain.offset == layout.pos_bias.offset + layout.pos_bias.size());
  CHECK(layout.out_ln_gain.offset == layout.blocks.back().b2.offset + layout.blocks.back().b2.size());
  CHECK(layout.head_b[2].offset + layout.head_b[2].size() == layout.total);
  const Index h = cfg.hidden_dim, f = cfg.ffn_dim;
  Index expected = cfg.input_dim * h + h + cfg.max_len * h;
  expected += cfg.num_blocks * (4 * h + 4 * h * h + h * f + f + f * h + h);
  expected += 2 * h + h * cfg.output_dim + cfg.output_dim;
  for (Index v : cfg.vocab_sizes) expected += h * v + v;
  CHECK(layout.total == expected);
}

TEST_CASE("forward shapes and row-stochastic attention") {
  const ConverterConfig cfg = small_config();
  const ConverterModel model = ConverterModel::initialized(cfg, 1);
  Rng rng(2);
  const RowMatrixXd input = oracle::random_matrix(17, 4, rng);
  const ForwardResult r = forward(model, input);
  CHECK(r.pred.rows() == 17);
  CHECK(r.pred.cols() == 4);
  for (std::size_t j = 0; j < kNumTokenizers; ++j) {
    CHECK(r.logits[j].rows() == 17);
    CHECK(r.logits[j].cols() == cfg.vocab_sizes[j]);
  }
  REQUIRE(r.cache.blocks.size() == 3);
  for (const BlockCache& b : r.cache.blocks) {
    CHECK(b.attn.rows() == 17);
    CHECK(b.attn.cols() == 17);
    CHECK((b.attn.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-6);
    CHECK(b.attn.minCoeff() >= 0.0);
  }
  CHECK(r.pred.allFinite());
}

TEST_CASE("forward is deterministic and dropout is off without an rng") {
  ConverterConfig cfg = small_config();
  cfg.dropout = 0.3;
  const ConverterModel model = ConverterModel::initialized(cfg, 3);
  Rng rng(4);
  const RowMatrixXd input = oracle::random_matrix(10, 4, rng);
  CHECK(forward(model, input).pred == forward(model, input).pred);
  Rng d1(5), d2(5);
  const RowMatrixXd a = forward(model, input, &d1).pred;
  CHECK(a == forward(model, input, &d2).pred);
  CHECK(a != forward(model, input).pred);
}

TEST_CASE("without attention the prompt cannot reach content positions") {
  ConverterConfig cfg = small_config();
  cfg.attention = false;
  const ConverterModel model = ConverterModel::initialized(cfg, 6);
  Rng rng(7);
  RowMatrixXd input = oracle::random_matrix(20, 4, rng);
  const RowMatrixXd before = forward(model, input).pred.bottomRows(12);
  input.topRows(8) = oracle::random_matrix(8, 4, rng);
  CHECK(forward(model, input).pred.bottomRows(12) == before);

  cfg.attention = true;
  const ConverterModel attending = ConverterModel::initialized(cfg, 6);
  const RowMatrixXd with = forward(attending, input).pred.bottomRows(12);
  input.topRows(8) = oracle::random_matrix(8, 4, rng);
  CHECK(forward(attending, input).pred.bottomRows(12) != with);
}

TEST_CASE("forward input errors") {
  const ConverterModel model = ConverterModel::initialized(small_config(), 1);
  Rng rng(8);
  CHECK_THROWS_AS(forward(model, oracle::random_matrix(5, 3, rng)), Error);
  CHECK_THROWS_AS(forward(model, oracle::random_matrix(41, 4, rng)), Error);
  CHECK_THROWS_AS(forward(model, RowMatrixXd(0, 4)), Error);
}

TEST_CASE("full-model gradient on the tiny setup") {
  const TinyGradCheckSetup setup = tiny_grad_check_setup();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const ConverterGradCheck check =
        check_converter_gradient(setup.converter, setup.prompt_frames, setup.content_frames, setup.loss, seed);
    CHECK(check.result.checked == ParamLayout(setup.converter).total);
    CHECK(check.result.max_rel_error < 1e-4);
  }
}

TEST_CASE("gradient check also holds without attention and with a single block") {
  TinyGradCheckSetup setup = tiny_grad_check_setup();
  setup.converter.attention = false;
  CHECK(check_converter_gradient(setup.converter, setup.prompt_frames, setup.content_frames, setup.loss, 4)
            .result.max_rel_error < 1e-4);
  setup = tiny_grad_check_setup();
  setup.converter.num_blocks = 1;
  CHECK(check_converter_gradient(setup.converter, setup.prompt_frames, setup.content_frames, setup.loss, 5)
            .result.max_rel_error < 1e-4);
}

TEST_CASE("generic gradient checker catches a wrong gradient") {
  Eigen::VectorXd x(3);
  x << 1.0, -2.0, 0.5;
  const auto f = [](const Eigen::VectorXd& v) { return v.squaredNorm(); };
  const Eigen::VectorXd right = 2.0 * x;
  CHECK(check_gradient(f, x, right).max_rel_error < 1e-8);
  Eigen::VectorXd wrong = right;
  wrong[1] *= 1.1;
  const GradCheckResult bad = check_gradient(f, x, wrong);
  CHECK(bad.max_rel_error > 0.05);
  CHECK(bad.worst_index == 1);
  CHECK(x[1] == -2.0);
}

TEST_CASE("Adam with a zero gradient leaves parameters untouched") {
  ConverterModel model = ConverterModel::initialized(small_config(), 9);
  const Eigen::VectorXd before = model.params();
  AdamState state;
  OptimizerConfig opt;
  adam_step(model, Eigen::VectorXd::Zero(before.size()), state, opt);
  CHECK(model.params() == before);
  CHECK(state.step == 1);
}

TEST_CASE("Adam first step moves every coordinate by about lr against the gradient sign") {
  ConverterModel model = ConverterModel::initialized(small_config(), 10);
  const Eigen::VectorXd before = model.params();
  Rng rng(11);
  Eigen::VectorXd grad(before.size());
  for (Index i = 0; i < grad.size(); ++i) grad[i] = rng.normal();
  AdamState state;
  OptimizerConfig opt{.learning_rate = 1e-3};
  adam_step(model, grad, state, opt);
  const Eigen::VectorXd delta = model.params() - before;
  for (Index i = 0; i < grad.size(); ++i) {
    CHECK(delta[i] * grad[i] < 0.0);
    CHECK(std::abs(std::abs(delta[i]) - 1e-3) < 1e-6);
  }
  // Moments decay geometrically under zero gradients.
  const Eigen::VectorXd m1 = state.m;
  adam_step(model, Eigen::VectorXd::Zero(grad.size()), state, opt);
  CHECK((state.m - opt.beta1 * m1).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("optimizer config validation") {
  CHECK_NOTHROW(OptimizerConfig{}.validate());
  CHECK_THROWS_AS(OptimizerConfig{.learning_rate = -1}.validate(), Error);
  CHECK_THROWS_AS(OptimizerConfig{.beta1 = 1.0}.validate(), Error);
  CHECK_THROWS_AS(OptimizerConfig{.batch_size = 0}.validate(), Error);
}

TEST_CASE("checkpoint round trip restores the float32 parameters") {
  ConverterConfig cfg = small_config();
  cfg.attention = false;
  cfg.tap_layers = std::array<Index, 3>{1, 2, 3};
  const ConverterModel model = ConverterModel::initialized(cfg, 12);
  const fs::path path = temp_path("model.vtm");
  write_checkpoint(model, path);
  const ConverterModel back = read_checkpoint(path);
  CHECK(back.config().num_blocks == cfg.num_blocks);
  CHECK(back.config().attention == false);
  CHECK(back.config().taps() == cfg.taps());
  CHECK(back.config().vocab_sizes == cfg.vocab_sizes);
  CHECK(back.params() == model.params().cast<float>().cast<double>());
  const fs::path again = temp_path("model_again.vtm");
  write_checkpoint(back, again);
  CHECK(slurp(again) == slurp(path));
}

TEST_CASE("golden VTM parses and rewrites identically") {
  const fs::path golden = fs::path(PROMPTVC_TEST_DATA) / "golden.vtm";
  const ConverterModel model = read_checkpoint(golden);
  const ConverterConfig& cfg = model.config();
  CHECK(cfg.num_blocks == 1);
  CHECK(cfg.hidden_dim == 2);
  CHECK(cfg.input_dim == 1);
  CHECK(cfg.max_len == 2);
  CHECK(cfg.vocab_sizes == std::array<Index, 3>{2, 3, 4});
  REQUIRE(model.params().size() == 78);
  for (Index i = 0; i < 78; ++i) CHECK(model.params()[i] == i * 0.125 - 4.0);
  const fs::path path = temp_path("golden_rewrite.vtm");
  write_checkpoint(model, path);
  CHECK(slurp(path) == slurp(golden));
}

TEST_CASE("corrupt checkpoints are rejected") {
  const fs::path golden = fs::path(PROMPTVC_TEST_DATA) / "golden.vtm";
  std::vector<char> bytes = slurp(golden);
  const fs::path path = temp_path("corrupt.vtm");
  std::vector<char> truncated(bytes.begin(), bytes.end() - 4);
  spit(path, truncated);
  CHECK_THROWS_AS(read_checkpoint(path), Error);
  bytes[0] = 'X';
  spit(path, bytes);
  CHECK_THROWS_AS(read_checkpoint(path), Error);
}
