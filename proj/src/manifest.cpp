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

#include "promptvc/manifest.hpp"

#include <fstream>
#include <sstream>

namespace promptvc {

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error(Errc::io_failure, "cannot open manifest: " + manifest.string());
  const auto base = manifest.parent_path();
  std::vector<ManifestEntry> entries;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::istringstream fields(line);
    ManifestEntry e;
    std::string path;
    if (!(fields >> e.speaker >> path))
      throw Error(Errc::invalid_argument,
                  manifest.string() + ":" + std::to_string(line_no) + ": expected '<speaker> <path>'");
    e.path = std::filesystem::path(path).is_absolute() ? std::filesystem::path(path) : base / path;
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw Error(Errc::invalid_argument, "manifest has no entries: " + manifest.string());
  return entries;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& manifest) {
  std::ofstream out(manifest);
  if (!out) throw Error(Errc::io_failure, "cannot write manifest: " + manifest.string());
  for (const auto& e : entries) out << e.speaker << '\t' << e.path.generic_string() << '\n';
  if (!out) throw Error(Errc::io_failure, "write failed: " + manifest.string());
}

SpeakerFeatures load_manifest_features(const std::filesystem::path& manifest) {
  SpeakerFeatures out;
  for (const auto& e : read_manifest(manifest)) out.emplace_back(e.speaker, read_features(e.path));
  return out;
}

void write_corpus(const SpeakerFeatures& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<ManifestEntry> entries;
  for (const auto& [id, m] : corpus) {
    const std::string name = id + ".vtf";
    write_features(m, dir / name);
    entries.push_back({id, name});
  }
  write_manifest(entries, dir / "manifest.tsv");
}

PairFiles write_pair(const TrainingPair& pair, std::size_t index, const std::filesystem::path& dir) {
  const std::string stem = "pair" + std::to_string(index);
  PairFiles files{stem + ".input.vtf", stem + ".content.vtf", stem + ".prompt.vtf", stem + ".target.vtf",
                  stem + ".ids.tsv"};
  write_features(pair.converter_input, dir / files.converter_input);
  write_features(pair.content, dir / files.content);
  write_features(pair.prompt, dir / files.prompt);
  write_features(pair.target, dir / files.target);
  std::ofstream ids(dir / files.ids);
  ids << "small\tmedium\tlarge\n";
  for (std::size_t t = 0; t < pair.target_ids[0].size(); ++t)
    ids << pair.target_ids[0][t] << '\t' << pair.target_ids[1][t] << '\t' << pair.target_ids[2][t] << '\n';
  if (!ids) throw Error(Errc::io_failure, "cannot write " + (dir / files.ids).string());
  return files;
}

std::string pair_manifest_header() {
  return "#index\tmode\tspeaker\tprompt_start\tprompt_frames\tinput\tcontent\tprompt\ttarget\tids";
}

std::string pair_manifest_line(const TrainingPair& pair, std::size_t index, const PairFiles& files) {
  std::ostringstream os;
  os << index << '\t' << to_string(pair.mode) << '\t' << (pair.speaker.empty() ? "-" : pair.speaker) << '\t'
     << pair.prompt_start << '\t' << pair.prompt_frames() << '\t' << files.converter_input.generic_string() << '\t'
     << files.content.generic_string() << '\t' << files.prompt.generic_string() << '\t'
     << files.target.generic_string() << '\t' << files.ids.generic_string();
  return os.str();
}

}  // namespace promptvc
