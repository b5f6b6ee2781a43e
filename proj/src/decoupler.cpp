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

#include "promptvc/decoupler.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace promptvc {
namespace {

void check_model(const DecouplerModel& model) {
  if (model.content_cb.dim() != model.residual_cb.dim())
    throw Error(Errc::dimension_mismatch, "decoupler: content and residual codebook dims differ");
  if (model.residual_cb.size() < 1 || !model.residual_cb.centroids.row(0).isZero(0.0))
    throw Error(Errc::invalid_argument, "decoupler: residual centroid 0 must be the zero vector");
}

struct TwoStage {
  TokenIds content_ids;
  TokenIds residual_ids;
  RowMatrixXd residual;  // x - c1
};

TwoStage run_two_stage(const DecouplerModel& model, const RowMatrixXd& x) {
  TwoStage out;
  out.content_ids = assign(model.content_cb, x);
  const RowMatrixXd c1 = model.content_cb.centroids.cast<double>();
  out.residual.resize(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) out.residual.row(i) = x.row(i) - c1.row(out.content_ids[i]);
  out.residual_ids = assign(model.residual_cb, out.residual);
  return out;
}

double utilization(const TokenIds& ids, Index k) {
  std::vector<bool> used(static_cast<std::size_t>(k), false);
  for (auto id : ids) used[id] = true;
  return static_cast<double>(std::count(used.begin(), used.end(), true)) / static_cast<double>(k);
}

}  // namespace

RowMatrixXd pool_frames(const std::vector<FeatureMatrix>& corpus) {
  if (corpus.empty()) throw Error(Errc::invalid_argument, "empty corpus");
  Index total = 0;
  const Index dim = corpus.front().dim();
  for (const auto& m : corpus) {
    if (m.dim() != dim) throw Error(Errc::dimension_mismatch, "corpus matrices differ in dim");
    total += m.frames();
  }
  RowMatrixXd out(total, dim);
  Index at = 0;
  for (const auto& m : corpus) {
    out.middleRows(at, m.frames()) = m.data().cast<double>();
    at += m.frames();
  }
  return out;
}

DecouplerModel fit_decoupler(const std::vector<FeatureMatrix>& corpus, const DecouplerConfig& config) {
  const RowMatrixXd x = pool_frames(corpus);

  KMeansConfig content_cfg;
  content_cfg.max_iters = config.max_iters;
  content_cfg.tol = config.tol;
  content_cfg.seed = config.seed;

  DecouplerModel model;
  model.seed = config.seed;
  model.content_cb = fit(x, config.k1, content_cfg);

  const TokenIds ids = assign(model.content_cb, x);
  const RowMatrixXd c1 = model.content_cb.centroids.cast<double>();
  RowMatrixXd residual(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) residual.row(i) = x.row(i) - c1.row(ids[i]);

  KMeansConfig residual_cfg = content_cfg;
  residual_cfg.seed = config.seed + 1;
  residual_cfg.pinned_centroids = RowMatrixXd::Zero(1, x.cols());
  residual_cfg.freeze_pinned = true;
  model.residual_cb = fit(residual, config.k2, residual_cfg);
  return model;
}

EncodedFeatures encode(const DecouplerModel& model, const FeatureMatrix& m) {
  check_model(model);
  if (m.dim() != model.dim())
    throw Error(Errc::dimension_mismatch, "encode: feature dim " + std::to_string(m.dim()) +
                                              " vs model dim " + std::to_string(model.dim()));
  TwoStage stages = run_two_stage(model, m.data().cast<double>());
  RowMatrixXf enhanced(m.frames(), m.dim());
  for (Index i = 0; i < m.frames(); ++i) {
    enhanced.row(i) = model.content_cb.centroids.row(stages.content_ids[i]) +
                      model.residual_cb.centroids.row(stages.residual_ids[i]);
  }
  return {FeatureMatrix(std::move(enhanced), m.hop_us()), std::move(stages.content_ids),
          std::move(stages.residual_ids)};
}

DistortionReport distortion_report(const DecouplerModel& model, const std::vector<FeatureMatrix>& corpus) {
  check_model(model);
  const RowMatrixXd x = pool_frames(corpus);
  if (x.cols() != model.dim()) throw Error(Errc::dimension_mismatch, "distortion_report: dim mismatch");
  const TwoStage stages = run_two_stage(model, x);
  const RowMatrixXd c2 = model.residual_cb.centroids.cast<double>();
  double s1 = 0.0;
  double s2 = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    s1 += stages.residual.row(i).squaredNorm();
    s2 += (stages.residual.row(i) - c2.row(stages.residual_ids[i])).squaredNorm();
  }
  DistortionReport report;
  report.frames = x.rows();
  report.stage1_mse = s1 / static_cast<double>(x.rows());
  report.stage2_mse = s2 / static_cast<double>(x.rows());
  report.content_utilization = utilization(stages.content_ids, model.content_cb.size());
  report.residual_utilization = utilization(stages.residual_ids, model.residual_cb.size());
  return report;
}

void save_decoupler(const DecouplerModel& model, const std::filesystem::path& dir) {
  check_model(model);
  std::filesystem::create_directories(dir);
  write_codebook(model.content_cb, dir / "content.vtc");
  write_codebook(model.residual_cb, dir / "residual.vtc");
  std::ofstream meta(dir / "decoupler.txt");
  meta << "combine_mode=sum\n"
       << "k1=" << model.content_cb.size() << "\n"
       << "k2=" << model.residual_cb.size() << "\n"
       << "seed=" << model.seed << "\n";
  if (!meta) throw Error(Errc::io_failure, "cannot write decoupler metadata in " + dir.string());
}

DecouplerModel load_decoupler(const std::filesystem::path& dir) {
  std::ifstream meta(dir / "decoupler.txt");
  if (!meta) throw Error(Errc::io_failure, "missing decoupler.txt in " + dir.string());
  std::map<std::string, std::string> kv;
  for (std::string line; std::getline(meta, line);) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (kv["combine_mode"] != "sum")
    throw Error(Errc::invalid_argument, "unsupported combine_mode '" + kv["combine_mode"] + "'");
  DecouplerModel model;
  model.content_cb = read_codebook(dir / "content.vtc");
  model.residual_cb = read_codebook(dir / "residual.vtc");
  model.seed = kv.count("seed") ? std::stoull(kv["seed"]) : 0;
  if (kv.count("k1") && std::stoll(kv["k1"]) != model.content_cb.size())
    throw Error(Errc::invalid_argument, "decoupler.txt k1 disagrees with content.vtc");
  if (kv.count("k2") && std::stoll(kv["k2"]) != model.residual_cb.size())
    throw Error(Errc::invalid_argument, "decoupler.txt k2 disagrees with residual.vtc");
  check_model(model);
  return model;
}

}  // namespace promptvc
