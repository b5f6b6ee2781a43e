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

#ifndef PROMPTVC_DECOUPLER_HPP
#define PROMPTVC_DECOUPLER_HPP

#include "promptvc/feature_io.hpp"
#include "promptvc/kmeans.hpp"

#include <filesystem>
#include <vector>

namespace promptvc {

enum class CombineMode { sum };

/// Two stacked codebooks: content quantization followed by quantization of
/// what the content centroid missed.
///
/// Residual centroid 0 is the zero vector, pinned at init and held fixed
/// through Lloyd, so the residual stage can always decline to move a frame.
struct DecouplerModel {
  Codebook content_cb;
  Codebook residual_cb;
  CombineMode combine_mode = CombineMode::sum;
  std::uint64_t seed = 0;

  Index dim() const { return content_cb.dim(); }
};

struct DecouplerConfig {
  Index k1 = 64;
  Index k2 = 16;
  int max_iters = 100;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

DecouplerModel fit_decoupler(const std::vector<FeatureMatrix>& corpus, const DecouplerConfig& config);

struct EncodedFeatures {
  FeatureMatrix enhanced;
  TokenIds content_ids;
  TokenIds residual_ids;
};

/// Per frame: c1 = nearest content centroid, c2 = nearest residual centroid
/// to x - c1, enhanced = c1 + c2.
EncodedFeatures encode(const DecouplerModel& model, const FeatureMatrix& m);

struct DistortionReport {
  double stage1_mse = 0.0;
  double stage2_mse = 0.0;
  double content_utilization = 0.0;
  double residual_utilization = 0.0;
  Index frames = 0;
};

DistortionReport distortion_report(const DecouplerModel& model, const std::vector<FeatureMatrix>& corpus);

/// Stacks all frames of the corpus into one double matrix.
RowMatrixXd pool_frames(const std::vector<FeatureMatrix>& corpus);

// Directory layout: content.vtc, residual.vtc, decoupler.txt (key=value).
void save_decoupler(const DecouplerModel& model, const std::filesystem::path& dir);
DecouplerModel load_decoupler(const std::filesystem::path& dir);

}  // namespace promptvc

#endif  // PROMPTVC_DECOUPLER_HPP
