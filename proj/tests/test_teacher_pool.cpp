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

#include "promptvc/teacher_pool.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <map>

using namespace promptvc;

TEST_CASE("build_pool validation and merging") {
  Rng rng(1);
  SUBCASE("single speaker") {
    const MatchingPool pool = build_pool({{"a", FeatureMatrix(oracle::random_matrix_f(150, 4, rng))}}, 8);
    CHECK(pool.num_speakers() == 1);
    CHECK(pool.k() == 8);
  }
  SUBCASE("too few frames") {
    CHECK_THROWS_AS(build_pool({{"a", FeatureMatrix(oracle::random_matrix_f(5, 4, rng))}}, 8), Error);
  }
  SUBCASE("duplicate ids merge in order") {
    const FeatureMatrix first(oracle::random_matrix_f(100, 4, rng));
    const FeatureMatrix second(oracle::random_matrix_f(100, 4, rng));
    const MatchingPool pool = build_pool({{"a", first}, {"a", second}}, 8);
    REQUIRE(pool.num_speakers() == 1);
    const auto& frames = pool.speaker("a").frames;
    CHECK(frames.rows() == 200);
    CHECK(frames.topRows(100) == first.data());
    CHECK(frames.bottomRows(100) == second.data());
  }
  SUBCASE("dim mismatch and bad k") {
    CHECK_THROWS_AS(build_pool({{"a", FeatureMatrix(oracle::random_matrix_f(10, 4, rng))},
                                {"b", FeatureMatrix(oracle::random_matrix_f(10, 3, rng))}},
                               2),
                    Error);
    CHECK_THROWS_AS(build_pool({{"a", FeatureMatrix(oracle::random_matrix_f(10, 4, rng))}}, 0), Error);
  }
}

TEST_CASE("hand-checked cosine example") {
  RowMatrixXf pool_frames(3, 2);
  pool_frames << 1, 0.1f, 0.9f, 0, -1, 0;
  const MatchingPool pool = build_pool({{"s", FeatureMatrix(pool_frames)}}, 2);
  RowMatrixXf src(1, 2);
  src << 1, 0;
  const FeatureMatrix out = knn_convert(pool, "s", FeatureMatrix(src));
  CHECK(out.data()(0, 0) == doctest::Approx(0.95).epsilon(1e-7));
  CHECK(out.data()(0, 1) == doctest::Approx(0.05).epsilon(1e-7));
  CHECK(out.data() == oracle::brute_knn(pool_frames, src, 2));
}

TEST_CASE("self pool with k = 1 is the identity") {
  Rng rng(2);
  const FeatureMatrix src(oracle::random_matrix_f(80, 6, rng));
  const MatchingPool pool = build_pool({{"me", src}}, 1);
  CHECK(knn_convert(pool, "me", src) == src);
}

TEST_CASE("knn_convert equals the exhaustive scan") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const RowMatrixXf pool_frames = oracle::random_matrix_f(512, 16, rng);
    const RowMatrixXf src = oracle::random_matrix_f(64, 16, rng);
    for (Index k : {1, 8}) {
      const MatchingPool pool = build_pool({{"s", FeatureMatrix(pool_frames)}}, k);
      const FeatureMatrix out = knn_convert(pool, "s", FeatureMatrix(src));
      CHECK(out.frames() == src.rows());
      CHECK(out.data() == oracle::brute_knn(pool_frames, src, k));
    }
  }
}

TEST_CASE("Euclidean switch matches its oracle") {
  Rng rng(4);
  const RowMatrixXf pool_frames = oracle::random_matrix_f(200, 5, rng);
  const RowMatrixXf src = oracle::random_matrix_f(30, 5, rng);
  const MatchingPool pool = build_pool({{"s", FeatureMatrix(pool_frames)}}, 4, Similarity::neg_squared_euclidean);
  CHECK(knn_convert(pool, "s", FeatureMatrix(src)).data() == oracle::brute_knn(pool_frames, src, 4, false));
}

TEST_CASE("ties prefer the lower pool index") {
  RowMatrixXf pool_frames(4, 2);
  pool_frames << 2, 0, 1, 0, 3, 0, 0, 1;
  const MatchingPool pool = build_pool({{"s", FeatureMatrix(pool_frames)}}, 1);
  RowMatrixXf src(1, 2);
  src << 5, 0;
  // Rows 0..2 all have cosine 1; row 0 wins.
  CHECK(knn_convert(pool, "s", FeatureMatrix(src)).data()(0, 0) == 2.0f);
}

TEST_CASE("knn_convert errors") {
  Rng rng(5);
  const MatchingPool pool = build_pool({{"s", FeatureMatrix(oracle::random_matrix_f(20, 3, rng))}}, 2);
  CHECK_THROWS_AS(knn_convert(pool, "nobody", FeatureMatrix(oracle::random_matrix_f(4, 3, rng))), Error);
  CHECK_THROWS_AS(knn_convert(pool, "s", FeatureMatrix(oracle::random_matrix_f(4, 2, rng))), Error);
  CHECK_THROWS_AS(knn_convert(pool, "s", FeatureMatrix(RowMatrixXf::Zero(2, 3))), Error);
}

TEST_CASE("sample_speaker") {
  Rng rng(6);
  SpeakerFeatures entries;
  for (const char* id : {"d", "b", "a", "c"}) entries.emplace_back(id, FeatureMatrix(oracle::random_matrix_f(10, 2, rng)));
  const MatchingPool pool = build_pool(entries, 1);

  SUBCASE("single speaker always drawn") {
    const MatchingPool one = build_pool({entries.front()}, 1);
    Rng r(1);
    for (int i = 0; i < 20; ++i) CHECK(sample_speaker(one, r) == "d");
  }
  SUBCASE("uniform within 0.25 +- 0.02 over 10000 draws") {
    Rng r(2024);
    std::map<std::string, int> counts;
    for (int i = 0; i < 10000; ++i) ++counts[sample_speaker(pool, r)];
    REQUIRE(counts.size() == 4);
    for (const auto& [id, c] : counts) CHECK(std::abs(c / 10000.0 - 0.25) <= 0.02);
  }
  SUBCASE("same seed, same sequence") {
    Rng a(77), b(77);
    for (int i = 0; i < 100; ++i) CHECK(sample_speaker(pool, a) == sample_speaker(pool, b));
  }
}
