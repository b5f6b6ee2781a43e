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

#include "promptvc/evalkit.hpp"

#include "promptvc/decoupler.hpp"
#include "promptvc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace promptvc {

void SyntheticCorpusSpec::validate() const {
  if (num_speakers < 1 || frames_per_speaker < 1 || dim < 1 || content_archetypes < 1)
    throw Error(Errc::invalid_argument, "SyntheticCorpusSpec: counts must be >= 1");
  if (!(speaker_offset_scale >= 0.0) || !(noise_sigma >= 0.0))
    throw Error(Errc::invalid_argument, "SyntheticCorpusSpec: scales must be >= 0");
  if (min_run < 1 || max_run < min_run) throw Error(Errc::invalid_argument, "SyntheticCorpusSpec: bad run lengths");
}

std::string synthetic_speaker_id(Index i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "spk%03lld", static_cast<long long>(i));
  return buf;
}

SyntheticCorpus generate_synthetic(const SyntheticCorpusSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SyntheticCorpus out;
  out.archetypes.resize(spec.content_archetypes, spec.dim);
  for (Index i = 0; i < out.archetypes.size(); ++i) out.archetypes.data()[i] = rng.normal();
  out.speaker_offsets.resize(spec.num_speakers, spec.dim);
  for (Index i = 0; i < out.speaker_offsets.size(); ++i)
    out.speaker_offsets.data()[i] = spec.speaker_offset_scale * rng.normal();

  const auto run_span = static_cast<std::uint64_t>(spec.max_run - spec.min_run + 1);
  for (Index s = 0; s < spec.num_speakers; ++s) {
    RowMatrixXf frames(spec.frames_per_speaker, spec.dim);
    std::vector<Index> labels(static_cast<std::size_t>(spec.frames_per_speaker));
    Index t = 0;
    while (t < spec.frames_per_speaker) {
      const auto arch = static_cast<Index>(rng.index(static_cast<std::uint64_t>(spec.content_archetypes)));
      const Index run = spec.min_run + static_cast<Index>(rng.index(run_span));
      for (Index r = 0; r < run && t < spec.frames_per_speaker; ++r, ++t) {
        labels[static_cast<std::size_t>(t)] = arch;
        for (Index c = 0; c < spec.dim; ++c) {
          const double noise = spec.noise_sigma > 0.0 ? spec.noise_sigma * rng.normal() : 0.0;
          frames(t, c) = static_cast<float>(out.archetypes(arch, c) + out.speaker_offsets(s, c) + noise);
        }
      }
    }
    out.speakers.emplace_back(synthetic_speaker_id(s), FeatureMatrix(std::move(frames)));
    out.content_labels.push_back(std::move(labels));
  }
  return out;
}

SpeakerFeatures generate_corpus(const SyntheticCorpusSpec& spec) { return generate_synthetic(spec).speakers; }

std::uint64_t corpus_checksum(const SpeakerFeatures& corpus) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [id, m] : corpus) {
    mix(id.data(), id.size());
    const std::uint32_t hop = m.hop_us();
    mix(&hop, sizeof(hop));
    mix(m.data().data(), sizeof(float) * static_cast<std::size_t>(m.data().size()));
  }
  return h;
}

double speaker_similarity_proxy(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.dim() != b.dim()) throw Error(Errc::dimension_mismatch, "speaker_similarity_proxy: dims differ");
  const Eigen::RowVectorXd ma = a.data().cast<double>().colwise().mean();
  const Eigen::RowVectorXd mb = b.data().cast<double>().colwise().mean();
  const double na = ma.norm();
  const double nb = mb.norm();
  if (na == 0.0 || nb == 0.0) throw Error(Errc::invalid_argument, "speaker_similarity_proxy: zero-norm mean");
  return std::clamp(ma.dot(mb) / (na * nb), -1.0, 1.0);
}

CodebookStats codebook_stats(const Codebook& cb, const std::vector<FeatureMatrix>& corpus) {
  if (corpus.empty()) throw Error(Errc::invalid_argument, "codebook_stats: empty corpus");
  const RowMatrixXd x = pool_frames(corpus);
  const TokenIds ids = assign(cb, x);
  CodebookStats stats;
  stats.histogram.assign(static_cast<std::size_t>(cb.size()), 0);
  for (auto id : ids) ++stats.histogram[id];
  const double n = static_cast<double>(ids.size());
  double entropy = 0.0;
  std::size_t used = 0;
  for (auto count : stats.histogram) {
    if (count == 0) continue;
    ++used;
    const double p = static_cast<double>(count) / n;
    entropy -= p * std::log(p);
  }
  stats.utilization = static_cast<double>(used) / static_cast<double>(cb.size());
  stats.perplexity = std::exp(entropy);
  return stats;
}

}  // namespace promptvc
