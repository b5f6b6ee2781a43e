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

#include "promptvc/toy_task.hpp"

namespace promptvc {

ToyTaskResult run_toy_task(const ToyTaskConfig& config, const std::function<void(int, const LossReport&)>& on_step) {
  const SyntheticCorpus corpus = generate_synthetic(config.corpus);
  const Index train_frames = config.corpus.frames_per_speaker - config.heldout_frames;
  if (train_frames < config.utterance_frames || config.heldout_frames < config.utterance_frames)
    throw Error(Errc::invalid_argument, "toy task: not enough frames for the train/held-out split");

  std::vector<FeatureMatrix> train_sets;
  SpeakerFeatures pool_entries;
  std::vector<FeatureMatrix> sources;
  std::vector<FeatureMatrix> heldout;
  for (const auto& [id, frames] : corpus.speakers) {
    const FeatureMatrix train = slice_frames(frames, 0, train_frames);
    train_sets.push_back(train);
    pool_entries.emplace_back(id, train);
    for (Index t = 0; t + config.utterance_frames <= train_frames; t += config.utterance_frames)
      sources.push_back(slice_frames(train, t, config.utterance_frames));
    heldout.push_back(slice_frames(frames, train_frames, config.heldout_frames));
  }

  DecouplerConfig dcfg = config.decoupler;
  dcfg.seed = config.corpus.seed;
  const DecouplerModel decoupler = fit_decoupler(train_sets, dcfg);
  const Tokenizers tokenizers = fit_tokenizers(pool_frames(train_sets), config.codebooks, config.corpus.seed + 100);
  MatchingPool pool;
  if (config.use_teacher) pool = build_pool(pool_entries, config.k);

  PairSampler sampler(sources, decoupler, config.use_teacher ? &pool : nullptr, tokenizers, config.pairs,
                      config.optimizer.seed + 1);
  std::size_t conversions = 0;
  std::size_t total = 0;
  const PairSource next = [&] {
    TrainingPair p = sampler.next();
    conversions += p.mode == PairMode::conversion ? 1 : 0;
    ++total;
    return p;
  };

  ConverterConfig ccfg = config.converter;
  ccfg.input_dim = config.corpus.dim;
  ccfg.output_dim = config.corpus.dim;
  ccfg.vocab_sizes = config.codebooks;
  TrainOptions options{config.loss, on_step};

  ToyTaskResult result{train(next, ccfg, config.optimizer, options), 0.0, 0.0, {}, 0.0, 0.0, 0.0};
  const auto& curve = result.training.curve;
  if (!curve.empty()) {
    result.smoothed_start = smoothed_total(curve, std::min<int>(50, static_cast<int>(curve.size())));
    result.smoothed_end = smoothed_total(curve, static_cast<int>(curve.size()));
  }
  result.conversion_fraction = total ? static_cast<double>(conversions) / static_cast<double>(total) : 0.0;

  // Every ordered (source, target) speaker pair on held-out frames.
  const Index prompt_len = std::min(config.pairs.prompt_frames, config.heldout_frames);
  for (std::size_t s = 0; s < heldout.size(); ++s) {
    const FeatureMatrix source = slice_frames(heldout[s], 0, config.utterance_frames);
    const FeatureMatrix content = encode(decoupler, source).enhanced;
    for (std::size_t t = 0; t < heldout.size(); ++t) {
      if (t == s) continue;
      const FeatureMatrix prompt = slice_frames(heldout[t], config.heldout_frames - prompt_len, prompt_len);
      const FeatureMatrix converted = convert(result.training.model, prompt, content);
      HeldoutConversion c{corpus.speakers[s].first, corpus.speakers[t].first,
                          speaker_similarity_proxy(converted, heldout[t]),
                          speaker_similarity_proxy(converted, heldout[s])};
      result.mean_proxy_target += c.proxy_target;
      result.mean_proxy_source += c.proxy_source;
      result.conversions.push_back(std::move(c));
    }
  }
  if (!result.conversions.empty()) {
    result.mean_proxy_target /= static_cast<double>(result.conversions.size());
    result.mean_proxy_source /= static_cast<double>(result.conversions.size());
  }
  return result;
}

}  // namespace promptvc
