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

#include "promptvc/cli.hpp"
#include "promptvc/converter.hpp"
#include "promptvc/decoupler.hpp"
#include "promptvc/manifest.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <sstream>

namespace fs = std::filesystem;
using namespace promptvc;
using namespace promptvc::testing;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "promptvc");
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST_CASE("pipeline: corpus, codebooks, pool, pairs and evaluation") {
  const fs::path dir = temp_dir("cli_pipeline");
  const std::string corpus = (dir / "corpus").string();
  const std::string manifest = (dir / "corpus" / "manifest.tsv").string();

  Run r = run({"gen-corpus", "--output", corpus, "--speakers", "3", "--frames", "200", "--dim", "6", "--seed", "5"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("speakers\t3") != std::string::npos);
  REQUIRE(read_manifest(manifest).size() == 3);

  r = run({"fit-kmeans", "--manifest", manifest, "--clusters", "5", "--output", (dir / "km.vtc").string(),
           "--seed", "1"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(read_codebook(dir / "km.vtc").size() == 5);

  r = run({"fit-decoupler", "--manifest", manifest, "--k1", "8", "--k2", "4", "--output", (dir / "dec").string(),
           "--seed", "2"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const DecouplerModel dec = load_decoupler(dir / "dec");
  CHECK(dec.content_cb.size() == 8);
  CHECK(dec.residual_cb.size() == 4);

  const std::string first = (dir / "corpus" / "spk000.vtf").string();
  r = run({"encode", "--model", (dir / "dec").string(), "--input", first, "--output", (dir / "enc.vtf").string(),
           "--ids", (dir / "enc.ids.tsv").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(read_features(dir / "enc.vtf") == encode(dec, read_features(first)).enhanced);
  CHECK(count_lines(dir / "enc.ids.tsv") == 201);

  r = run({"fit-tokenizers", "--manifest", manifest, "--codebooks", "4,6,8", "--output", (dir / "tok").string(),
           "--seed", "3"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(read_codebook(dir / "tok" / "large.vtc").size() == 8);

  r = run({"build-pool", "--manifest", manifest, "--k", "4", "--output", (dir / "pool").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const std::string pool = (dir / "pool" / "manifest.tsv").string();

  r = run({"make-pairs", "--manifest", manifest, "--pool", pool, "--decoupler", (dir / "dec").string(),
           "--tokenizers", (dir / "tok").string(), "--count", "6", "--prompt-seconds", "1.0", "--k", "4",
           "--output", (dir / "pairs").string(), "--seed", "4"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("prompt_frames\t50") != std::string::npos);
  CHECK(count_lines(dir / "pairs" / "pairs.tsv") == 7);
  const FeatureMatrix input = read_features(dir / "pairs" / "pair0.input.vtf");
  const FeatureMatrix prompt = read_features(dir / "pairs" / "pair0.prompt.vtf");
  CHECK(input.frames() == prompt.frames() + 200);

  r = run({"eval", "--manifest", manifest, "--decoupler", (dir / "dec").string(), "--codebook",
           (dir / "km.vtc").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("stage2_mse") != std::string::npos);
  CHECK(r.out.find("perplexity") != std::string::npos);

  r = run({"eval", "--a", first, "--b", first});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("similarity_proxy\t1") != std::string::npos);
}

TEST_CASE("knn-convert against a self pool with k = 1 reproduces the input") {
  const fs::path dir = temp_dir("cli_knn");
  REQUIRE(run({"gen-corpus", "--output", dir.string(), "--speakers", "2", "--frames", "80", "--dim", "4", "--seed",
               "9"})
              .code == 0);
  const std::string src = (dir / "spk001.vtf").string();
  const Run r = run({"knn-convert", "--pool", (dir / "manifest.tsv").string(), "--speaker", "spk001", "--input", src,
                     "--output", (dir / "out.vtf").string(), "--k", "1"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(read_features(dir / "out.vtf") == read_features(src));

  CHECK(run({"knn-convert", "--pool", (dir / "manifest.tsv").string(), "--speaker", "nobody", "--input", src,
             "--output", (dir / "x.vtf").string()})
            .code == cli::kExitRuntime);
}

TEST_CASE("train-toy writes a checkpoint and a loss log") {
  const fs::path dir = temp_dir("cli_train");
  const Run r = run({"train-toy", "--steps", "3", "--k1", "16", "--k2", "4", "--output",
                     (dir / "model.vtm").string(), "--log", (dir / "loss.tsv").string(), "--seed", "7"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(count_lines(dir / "loss.tsv") == 4);
  CHECK(read_checkpoint(dir / "model.vtm").config().vocab_sizes == std::array<Index, 3>{8, 16, 32});
}

TEST_CASE("usage errors exit with status 2, runtime errors with status 1") {
  CHECK(run({"no-such-command"}).code == cli::kExitUsage);
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"gen-corpus", "--output", temp_path("nowhere").string()}).code == cli::kExitUsage);
  CHECK(run({"grad-check", "--config", "huge", "--seed", "1"}).code == cli::kExitUsage);
  CHECK(run({"eval"}).code == cli::kExitUsage);
  CHECK(run({"fit-kmeans", "--clusters", "3", "--output", temp_path("k.vtc").string(), "--seed", "1"}).code ==
        cli::kExitRuntime);
  const Run help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("make-pairs") != std::string::npos);
}

TEST_CASE("grad-check reports its error") {
  const Run r = run({"grad-check", "--seed", "7"});
  CHECK(r.code == 0);
  CHECK(r.out.find("max_relative_error") != std::string::npos);
}
