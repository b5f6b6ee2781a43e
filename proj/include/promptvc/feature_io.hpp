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

#ifndef PROMPTVC_FEATURE_IO_HPP
#define PROMPTVC_FEATURE_IO_HPP

#include "promptvc/common.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace promptvc {

/// A time-ordered sequence of fixed-dimension frames from one utterance.
///
/// Values are held in single precision, which is also the on-disk width, so
/// that a write/read round trip is bit-exact. The hop is kept as integral
/// microseconds for the same reason. Instances validate their invariants on
/// construction and are not mutated afterwards by any library routine.
class FeatureMatrix {
 public:
  static constexpr std::uint32_t kDefaultHopUs = 20000;

  FeatureMatrix() = default;
  explicit FeatureMatrix(RowMatrixXf data, std::uint32_t hop_us = kDefaultHopUs);

  Index frames() const { return data_.rows(); }
  Index dim() const { return data_.cols(); }
  std::uint32_t hop_us() const { return hop_us_; }
  double hop_ms() const { return hop_us_ / 1000.0; }

  const RowMatrixXf& data() const { return data_; }
  auto row(Index t) const { return data_.row(t); }

  bool empty() const { return data_.size() == 0; }

  /// Bitwise equality of payload and header fields.
  friend bool operator==(const FeatureMatrix& a, const FeatureMatrix& b);

 private:
  RowMatrixXf data_;
  std::uint32_t hop_us_ = kDefaultHopUs;
};

/// (speaker-id, features) entries as listed in a manifest.
using SpeakerFeatures = std::vector<std::pair<std::string, FeatureMatrix>>;

/// Contiguous copy of rows [start, start + len).
FeatureMatrix slice_frames(const FeatureMatrix& m, Index start, Index len);

/// Concatenates along time. Dims and hops must agree.
FeatureMatrix concat_frames(const FeatureMatrix& head, const FeatureMatrix& tail);

/// round(seconds * 1000 / hop_ms); 3 s at a 20 ms hop gives 150 frames.
Index prompt_frame_count(double seconds, double hop_ms);

inline constexpr std::uint32_t kFeatureFormatVersion = 1;
inline constexpr std::uint32_t kCodebookFormatVersion = 1;

// "VTF1" layout, little-endian:
//   magic[4] version:u32 frames:u64 dim:u64 hop_us:u32 payload:f32[frames*dim]
void write_features(const FeatureMatrix& m, const std::filesystem::path& path);
FeatureMatrix read_features(const std::filesystem::path& path);

struct Codebook;

// "VTC1" layout, little-endian:
//   magic[4] version:u32 num_centroids:u64 dim:u64 seed:u64 distortion:f64
//   payload:f32[num_centroids*dim]
void write_codebook(const Codebook& cb, const std::filesystem::path& path);
Codebook read_codebook(const std::filesystem::path& path);

}  // namespace promptvc

#endif  // PROMPTVC_FEATURE_IO_HPP
