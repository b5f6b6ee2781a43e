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

#ifndef PROMPTVC_MANIFEST_HPP
#define PROMPTVC_MANIFEST_HPP

#include "promptvc/evalkit.hpp"
#include "promptvc/pair_sampler.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace promptvc {

struct ManifestEntry {
  std::string speaker;
  std::filesystem::path path;
};

/// One "<speaker-id><TAB><feature-file>" per line. Blank lines and lines
/// starting with '#' are skipped; relative paths resolve against the
/// manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& manifest);

SpeakerFeatures load_manifest_features(const std::filesystem::path& manifest);

/// Writes each matrix as <dir>/<speaker>.vtf plus <dir>/manifest.tsv.
void write_corpus(const SpeakerFeatures& corpus, const std::filesystem::path& dir);

/// Writes the pair's matrices as VTF files and its token ids as a TSV with
/// one column per tokenizer, named <dir>/pair<index>.<part>.
struct PairFiles {
  std::filesystem::path converter_input, content, prompt, target, ids;
};
PairFiles write_pair(const TrainingPair& pair, std::size_t index, const std::filesystem::path& dir);

/// Manifest line: index mode speaker prompt_start prompt_frames followed by
/// the five file names, tab-separated. Speaker is "-" in reconstruction mode.
std::string pair_manifest_line(const TrainingPair& pair, std::size_t index, const PairFiles& files);
std::string pair_manifest_header();

}  // namespace promptvc

#endif  // PROMPTVC_MANIFEST_HPP
