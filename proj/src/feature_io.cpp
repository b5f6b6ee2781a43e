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

#include "promptvc/feature_io.hpp"

#include "binary_io.hpp"
#include "promptvc/kmeans.hpp"

#include <cmath>
#include <cstring>

namespace promptvc {

FeatureMatrix::FeatureMatrix(RowMatrixXf data, std::uint32_t hop_us)
    : data_(std::move(data)), hop_us_(hop_us) {
  if (data_.rows() < 1 || data_.cols() < 1)
    throw Error(Errc::invalid_argument, "FeatureMatrix needs at least one frame and one dimension");
  if (hop_us_ == 0) throw Error(Errc::invalid_argument, "FeatureMatrix hop must be positive");
  if (!data_.allFinite()) throw Error(Errc::non_finite, "FeatureMatrix contains non-finite values");
}

bool operator==(const FeatureMatrix& a, const FeatureMatrix& b) {
  return a.hop_us_ == b.hop_us_ && a.data_.rows() == b.data_.rows() &&
         a.data_.cols() == b.data_.cols() &&
         std::memcmp(a.data_.data(), b.data_.data(), sizeof(float) * a.data_.size()) == 0;
}

FeatureMatrix slice_frames(const FeatureMatrix& m, Index start, Index len) {
  if (start < 0 || len < 1 || start + len > m.frames())
    throw Error(Errc::out_of_range, "slice [" + std::to_string(start) + ", " +
                                        std::to_string(start + len) + ") outside " +
                                        std::to_string(m.frames()) + " frames");
  return FeatureMatrix(m.data().middleRows(start, len), m.hop_us());
}

FeatureMatrix concat_frames(const FeatureMatrix& head, const FeatureMatrix& tail) {
  if (head.dim() != tail.dim())
    throw Error(Errc::dimension_mismatch, "concat_frames: dims differ");
  if (head.hop_us() != tail.hop_us())
    throw Error(Errc::invalid_argument, "concat_frames: hops differ");
  RowMatrixXf joined(head.frames() + tail.frames(), head.dim());
  joined << head.data(), tail.data();
  return FeatureMatrix(std::move(joined), head.hop_us());
}

Index prompt_frame_count(double seconds, double hop_ms) {
  if (!(seconds > 0.0) || !(hop_ms > 0.0))
    throw Error(Errc::invalid_argument, "prompt length and hop must be positive");
  return static_cast<Index>(std::llround(seconds * 1000.0 / hop_ms));
}

void write_features(const FeatureMatrix& m, const std::filesystem::path& path) {
  if (m.empty()) throw Error(Errc::invalid_argument, "write_features: empty matrix");
  if (!m.data().allFinite()) throw Error(Errc::non_finite, "write_features: non-finite values");
  detail::BinaryWriter out(path);
  out.magic("VTF1");
  out.put<std::uint32_t>(kFeatureFormatVersion);
  out.put<std::uint64_t>(static_cast<std::uint64_t>(m.frames()));
  out.put<std::uint64_t>(static_cast<std::uint64_t>(m.dim()));
  out.put<std::uint32_t>(m.hop_us());
  out.put_f32_payload(m.data());
  out.finish();
}

FeatureMatrix read_features(const std::filesystem::path& path) {
  detail::BinaryReader in(path);
  in.expect_magic("VTF1");
  in.expect_version(kFeatureFormatVersion);
  const auto frames = in.get<std::uint64_t>();
  const auto dim = in.get<std::uint64_t>();
  const auto hop_us = in.get<std::uint32_t>();
  if (frames == 0 || dim == 0 || hop_us == 0)
    throw Error(Errc::invalid_argument, "VTF header has zero frames, dim or hop: " + path.string());
  RowMatrixXf data = in.get_f32_payload(frames, dim);
  if (!data.allFinite()) throw Error(Errc::non_finite, "VTF payload has non-finite values: " + path.string());
  return FeatureMatrix(std::move(data), hop_us);
}

void write_codebook(const Codebook& cb, const std::filesystem::path& path) {
  if (cb.size() < 1 || cb.dim() < 1) throw Error(Errc::invalid_argument, "write_codebook: empty codebook");
  if (!cb.centroids.allFinite()) throw Error(Errc::non_finite, "write_codebook: non-finite centroid");
  if (!(cb.distortion >= 0.0) || !std::isfinite(cb.distortion))
    throw Error(Errc::invalid_argument, "write_codebook: distortion must be finite and >= 0");
  detail::BinaryWriter out(path);
  out.magic("VTC1");
  out.put<std::uint32_t>(kCodebookFormatVersion);
  out.put<std::uint64_t>(static_cast<std::uint64_t>(cb.size()));
  out.put<std::uint64_t>(static_cast<std::uint64_t>(cb.dim()));
  out.put<std::uint64_t>(cb.seed);
  out.put<double>(cb.distortion);
  out.put_f32_payload(cb.centroids);
  out.finish();
}

Codebook read_codebook(const std::filesystem::path& path) {
  detail::BinaryReader in(path);
  in.expect_magic("VTC1");
  in.expect_version(kCodebookFormatVersion);
  Codebook cb;
  const auto count = in.get<std::uint64_t>();
  const auto dim = in.get<std::uint64_t>();
  cb.seed = in.get<std::uint64_t>();
  cb.distortion = in.get<double>();
  if (count == 0 || dim == 0)
    throw Error(Errc::invalid_argument, "VTC header has zero centroids or dim: " + path.string());
  if (!(cb.distortion >= 0.0) || !std::isfinite(cb.distortion))
    throw Error(Errc::non_finite, "VTC distortion invalid: " + path.string());
  cb.centroids = in.get_f32_payload(count, dim);
  if (!cb.centroids.allFinite())
    throw Error(Errc::non_finite, "VTC payload has non-finite values: " + path.string());
  return cb;
}

}  // namespace promptvc
