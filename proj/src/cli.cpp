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

#include "promptvc/decoupler.hpp"
#include "promptvc/evalkit.hpp"
#include "promptvc/gradcheck.hpp"
#include "promptvc/manifest.hpp"
#include "promptvc/pair_sampler.hpp"
#include "promptvc/teacher_pool.hpp"
#include "promptvc/toy_task.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace promptvc::cli {
namespace {

namespace fs = std::filesystem;

struct Inputs {
  std::vector<std::string> files;
  std::string manifest;

  void add_to(CLI::App* app) {
    app->add_option("--input", files, "Feature files (VTF)")->check(CLI::ExistingFile);
    app->add_option("--manifest", manifest, "Speaker manifest listing feature files")->check(CLI::ExistingFile);
  }

  std::vector<FeatureMatrix> load() const {
    std::vector<FeatureMatrix> out;
    for (const auto& f : files) out.push_back(read_features(f));
    if (!manifest.empty()) {
      for (auto& [id, m] : load_manifest_features(manifest)) out.push_back(std::move(m));
    }
    if (out.empty()) throw Error(Errc::invalid_argument, "no input features (use --input or --manifest)");
    return out;
  }
};

std::array<Index, kNumTokenizers> to_codebook_sizes(const std::vector<Index>& sizes) {
  if (sizes.size() != kNumTokenizers)
    throw CLI::ValidationError("--codebooks", "expects three sizes: small,medium,large");
  return {sizes[0], sizes[1], sizes[2]};
}

Similarity parse_similarity(const std::string& name) {
  return name == "euclidean" ? Similarity::neg_squared_euclidean : Similarity::cosine;
}

Tokenizers load_tokenizers(const fs::path& dir) {
  return {read_codebook(dir / "small.vtc"), read_codebook(dir / "medium.vtc"), read_codebook(dir / "large.vtc")};
}

}  // namespace

int dispatch(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"promptvc: decoupling, teacher pairing and converter training on feature matrices"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::uint64_t seed = 0;
  std::function<void()> action;

  // gen-corpus
  SyntheticCorpusSpec corpus_spec;
  std::string out_path;
  auto* gen = app.add_subcommand("gen-corpus", "Write a synthetic speaker corpus (VTF files + manifest)");
  gen->add_option("--output", out_path, "Output directory")->required();
  gen->add_option("--speakers", corpus_spec.num_speakers)->capture_default_str();
  gen->add_option("--frames", corpus_spec.frames_per_speaker, "Frames per speaker")->capture_default_str();
  gen->add_option("--dim", corpus_spec.dim)->capture_default_str();
  gen->add_option("--archetypes", corpus_spec.content_archetypes)->capture_default_str();
  gen->add_option("--offset-scale", corpus_spec.speaker_offset_scale)->capture_default_str();
  gen->add_option("--noise", corpus_spec.noise_sigma)->capture_default_str();
  gen->add_option("--seed", seed)->required();
  gen->callback([&] {
    action = [&] {
      corpus_spec.seed = seed;
      const SpeakerFeatures corpus = generate_corpus(corpus_spec);
      write_corpus(corpus, out_path);
      out << "speakers\t" << corpus.size() << "\nchecksum\t" << std::hex << corpus_checksum(corpus) << std::dec
          << "\nmanifest\t" << (fs::path(out_path) / "manifest.tsv").generic_string() << "\n";
    };
  });

  // fit-kmeans
  Inputs km_inputs;
  Index clusters = 0;
  int max_iters = 100;
  auto* fkm = app.add_subcommand("fit-kmeans", "Fit one K-Means codebook (VTC)");
  km_inputs.add_to(fkm);
  fkm->add_option("--clusters", clusters, "Number of centroids")->required()->check(CLI::PositiveNumber);
  fkm->add_option("--max-iters", max_iters)->capture_default_str();
  fkm->add_option("--output", out_path, "Output VTC file")->required();
  fkm->add_option("--seed", seed)->required();
  fkm->callback([&] {
    action = [&] {
      KMeansConfig cfg;
      cfg.seed = seed;
      cfg.max_iters = max_iters;
      const Codebook cb = fit(pool_frames(km_inputs.load()), clusters, cfg);
      write_codebook(cb, out_path);
      out << "centroids\t" << cb.size() << "\ndistortion\t" << std::setprecision(9) << cb.distortion
          << "\niterations\t" << cb.fit_distortion_trace.size() << "\n";
    };
  });

  // fit-decoupler
  Inputs dec_inputs;
  DecouplerConfig dec_cfg;
  auto* fdec = app.add_subcommand("fit-decoupler", "Fit the content + residual codebooks");
  dec_inputs.add_to(fdec);
  fdec->add_option("--k1", dec_cfg.k1, "Content codebook size")->capture_default_str();
  fdec->add_option("--k2", dec_cfg.k2, "Residual codebook size")->capture_default_str();
  fdec->add_option("--max-iters", dec_cfg.max_iters)->capture_default_str();
  fdec->add_option("--output", out_path, "Output directory")->required();
  fdec->add_option("--seed", seed)->required();
  fdec->callback([&] {
    action = [&] {
      dec_cfg.seed = seed;
      const auto corpus = dec_inputs.load();
      const DecouplerModel model = fit_decoupler(corpus, dec_cfg);
      save_decoupler(model, out_path);
      const DistortionReport r = distortion_report(model, corpus);
      out << std::setprecision(9) << "stage1_mse\t" << r.stage1_mse << "\nstage2_mse\t" << r.stage2_mse << "\n";
    };
  });

  // encode
  std::string model_dir;
  std::string in_path;
  std::string ids_path;
  auto* enc = app.add_subcommand("encode", "Encode features into the enhanced content representation");
  enc->add_option("--model", model_dir, "Decoupler directory")->required()->check(CLI::ExistingDirectory);
  enc->add_option("--input", in_path, "Input VTF")->required()->check(CLI::ExistingFile);
  enc->add_option("--output", out_path, "Output VTF")->required();
  enc->add_option("--ids", ids_path, "Optional TSV of content/residual ids per frame");
  enc->callback([&] {
    action = [&] {
      const EncodedFeatures e = encode(load_decoupler(model_dir), read_features(in_path));
      write_features(e.enhanced, out_path);
      if (!ids_path.empty()) {
        std::ofstream ids(ids_path);
        ids << "content\tresidual\n";
        for (std::size_t t = 0; t < e.content_ids.size(); ++t)
          ids << e.content_ids[t] << '\t' << e.residual_ids[t] << '\n';
        if (!ids) throw Error(Errc::io_failure, "cannot write " + ids_path);
      }
      out << "frames\t" << e.enhanced.frames() << "\n";
    };
  });

  // build-pool
  std::string manifest_path;
  Index k = 8;
  std::string similarity = "cosine";
  auto* bpool = app.add_subcommand("build-pool", "Validate a matching pool and write one VTF per speaker");
  bpool->add_option("--manifest", manifest_path, "Speaker manifest")->required()->check(CLI::ExistingFile);
  bpool->add_option("--k", k, "Neighbours per query")->capture_default_str();
  bpool->add_option("--similarity", similarity)->check(CLI::IsMember({"cosine", "euclidean"}))->capture_default_str();
  bpool->add_option("--output", out_path, "Output directory")->required();
  bpool->callback([&] {
    action = [&] {
      const MatchingPool pool = build_pool(load_manifest_features(manifest_path), k, parse_similarity(similarity));
      SpeakerFeatures merged;
      for (const auto& id : pool.speaker_ids())
        merged.emplace_back(id, FeatureMatrix(pool.speaker(id).frames, pool.hop_us()));
      write_corpus(merged, out_path);
      for (const auto& [id, m] : merged) out << id << '\t' << m.frames() << "\n";
    };
  });

  // knn-convert
  std::string speaker;
  auto* knn = app.add_subcommand("knn-convert", "Convert features to a pool speaker by kNN matching");
  knn->add_option("--pool", manifest_path, "Pool manifest")->required()->check(CLI::ExistingFile);
  knn->add_option("--speaker", speaker, "Target speaker id")->required();
  knn->add_option("--input", in_path, "Source VTF")->required()->check(CLI::ExistingFile);
  knn->add_option("--output", out_path, "Output VTF")->required();
  knn->add_option("--k", k, "Neighbours per query")->capture_default_str();
  knn->add_option("--similarity", similarity)->check(CLI::IsMember({"cosine", "euclidean"}))->capture_default_str();
  knn->callback([&] {
    action = [&] {
      const MatchingPool pool = build_pool(load_manifest_features(manifest_path), k, parse_similarity(similarity));
      const FeatureMatrix converted = knn_convert(pool, speaker, read_features(in_path));
      write_features(converted, out_path);
      out << "frames\t" << converted.frames() << "\n";
    };
  });

  // fit-tokenizers
  Inputs tok_inputs;
  std::vector<Index> codebooks{8, 16, 32};
  auto* ftok = app.add_subcommand("fit-tokenizers", "Fit the small/medium/large progressive codebooks");
  tok_inputs.add_to(ftok);
  ftok->add_option("--codebooks", codebooks, "Sizes small,medium,large")->delimiter(',')->capture_default_str();
  ftok->add_option("--max-iters", max_iters)->capture_default_str();
  ftok->add_option("--output", out_path, "Output directory")->required();
  ftok->add_option("--seed", seed)->required();
  ftok->callback([&] {
    action = [&] {
      const Tokenizers toks = fit_tokenizers(pool_frames(tok_inputs.load()), to_codebook_sizes(codebooks), seed, max_iters);
      fs::create_directories(out_path);
      const char* names[] = {"small", "medium", "large"};
      for (std::size_t j = 0; j < kNumTokenizers; ++j) {
        write_codebook(toks[j], fs::path(out_path) / (std::string(names[j]) + ".vtc"));
        out << names[j] << '\t' << toks[j].size() << '\t' << std::setprecision(9) << toks[j].distortion << "\n";
      }
    };
  });

  // make-pairs
  Inputs pair_inputs;
  std::string decoupler_dir;
  std::string tokenizer_dir;
  std::size_t count = 100;
  double p_conversion = 0.5;
  double prompt_seconds = 3.0;
  auto* mp = app.add_subcommand("make-pairs", "Sample dual-mode training pairs");
  pair_inputs.add_to(mp);
  mp->add_option("--pool", manifest_path, "Pool manifest (needed when --p-conversion > 0)")->check(CLI::ExistingFile);
  mp->add_option("--decoupler", decoupler_dir)->required()->check(CLI::ExistingDirectory);
  mp->add_option("--tokenizers", tokenizer_dir)->required()->check(CLI::ExistingDirectory);
  mp->add_option("--count", count)->capture_default_str();
  mp->add_option("--p-conversion", p_conversion)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  mp->add_option("--prompt-seconds", prompt_seconds)->check(CLI::PositiveNumber)->capture_default_str();
  mp->add_option("--k", k, "Teacher neighbours")->capture_default_str();
  mp->add_option("--output", out_path, "Output directory")->required();
  mp->add_option("--seed", seed)->required();
  mp->callback([&] {
    action = [&] {
      const auto sources = pair_inputs.load();
      const DecouplerModel decoupler = load_decoupler(decoupler_dir);
      const Tokenizers toks = load_tokenizers(tokenizer_dir);
      std::optional<MatchingPool> pool;
      if (!manifest_path.empty()) pool = build_pool(load_manifest_features(manifest_path), k);
      if (p_conversion > 0.0 && !pool) throw Error(Errc::invalid_argument, "--pool is required when --p-conversion > 0");
      PairConfig cfg;
      cfg.p_conversion = p_conversion;
      cfg.prompt_frames = prompt_frame_count(prompt_seconds, sources.front().hop_ms());
      PairSampler sampler(sources, decoupler, pool ? &*pool : nullptr, toks, cfg, seed);
      fs::create_directories(out_path);
      std::ofstream manifest(fs::path(out_path) / "pairs.tsv");
      manifest << pair_manifest_header() << "\n";
      std::size_t conversions = 0;
      for (std::size_t i = 0; i < count; ++i) {
        const TrainingPair pair = sampler.next();
        conversions += pair.mode == PairMode::conversion;
        manifest << pair_manifest_line(pair, i, write_pair(pair, i, out_path)) << "\n";
      }
      if (!manifest) throw Error(Errc::io_failure, "cannot write pairs.tsv");
      out << "pairs\t" << count << "\nconversion\t" << conversions << "\nprompt_frames\t" << cfg.prompt_frames << "\n";
    };
  });

  // train-toy
  ToyTaskConfig toy;
  int steps = 2000;
  double lr = 5e-4;
  std::string log_path;
  auto* tt = app.add_subcommand("train-toy", "Train the toy converter end to end on the synthetic corpus");
  tt->add_option("--steps", steps)->capture_default_str();
  tt->add_option("--lr", lr)->capture_default_str();
  tt->add_option("--batch-size", toy.optimizer.batch_size)->capture_default_str();
  tt->add_option("--p-conversion", toy.pairs.p_conversion)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  tt->add_option("--prompt-seconds", prompt_seconds)->check(CLI::PositiveNumber)->capture_default_str();
  tt->add_option("--k", toy.k)->capture_default_str();
  tt->add_option("--k1", toy.decoupler.k1)->capture_default_str();
  tt->add_option("--k2", toy.decoupler.k2)->capture_default_str();
  tt->add_option("--codebooks", codebooks, "Sizes small,medium,large")->delimiter(',')->capture_default_str();
  tt->add_option("--output", out_path, "Optional checkpoint (VTM)");
  tt->add_option("--log", log_path, "Optional per-step loss TSV");
  tt->add_option("--seed", seed)->required();
  tt->callback([&] {
    action = [&] {
      toy.corpus.seed = seed;
      toy.optimizer.seed = seed;
      toy.optimizer.steps = steps;
      toy.optimizer.learning_rate = lr;
      toy.codebooks = to_codebook_sizes(codebooks);
      toy.pairs.prompt_frames = prompt_frame_count(prompt_seconds, FeatureMatrix::kDefaultHopUs / 1000.0);
      toy.use_teacher = toy.pairs.p_conversion > 0.0;
      std::ofstream log;
      if (!log_path.empty()) {
        log.open(log_path);
        log << "step\t" << LossReport::tsv_header() << "\n";
      }
      const ToyTaskResult r = run_toy_task(toy, [&](int step, const LossReport& rep) {
        if (log.is_open()) log << step << '\t' << rep.to_tsv() << "\n";
      });
      if (!out_path.empty()) write_checkpoint(r.training.model, out_path);
      out << std::setprecision(6) << "smoothed_start\t" << r.smoothed_start << "\nsmoothed_end\t" << r.smoothed_end
          << "\nconversion_fraction\t" << r.conversion_fraction << "\nproxy_target\t" << r.mean_proxy_target
          << "\nproxy_source\t" << r.mean_proxy_source << "\n";
    };
  });

  // eval
  Inputs eval_inputs;
  std::string codebook_path;
  std::string a_path;
  std::string b_path;
  auto* ev = app.add_subcommand("eval", "Distortion report, codebook statistics or similarity proxy");
  eval_inputs.add_to(ev);
  ev->add_option("--decoupler", decoupler_dir, "Report stage-1/stage-2 distortion")->check(CLI::ExistingDirectory);
  ev->add_option("--codebook", codebook_path, "Report utilization and perplexity")->check(CLI::ExistingFile);
  ev->add_option("--a", a_path, "First VTF for the similarity proxy")->check(CLI::ExistingFile);
  ev->add_option("--b", b_path, "Second VTF for the similarity proxy")->check(CLI::ExistingFile);
  ev->callback([&] {
    action = [&] {
      bool any = false;
      out << std::setprecision(9);
      if (!decoupler_dir.empty()) {
        const DistortionReport r = distortion_report(load_decoupler(decoupler_dir), eval_inputs.load());
        out << "stage1_mse\t" << r.stage1_mse << "\nstage2_mse\t" << r.stage2_mse << "\ncontent_utilization\t"
            << r.content_utilization << "\nresidual_utilization\t" << r.residual_utilization << "\n";
        any = true;
      }
      if (!codebook_path.empty()) {
        const CodebookStats s = codebook_stats(read_codebook(codebook_path), eval_inputs.load());
        out << "utilization\t" << s.utilization << "\nperplexity\t" << s.perplexity << "\n";
        any = true;
      }
      if (!a_path.empty() || !b_path.empty()) {
        if (a_path.empty() || b_path.empty()) throw CLI::ValidationError("--a/--b", "both files are required");
        out << "similarity_proxy\t" << speaker_similarity_proxy(read_features(a_path), read_features(b_path)) << "\n";
        any = true;
      }
      if (!any) throw CLI::ValidationError("eval", "give --decoupler, --codebook or --a/--b");
    };
  });

  // grad-check
  std::string gc_config = "tiny";
  auto* gc = app.add_subcommand("grad-check", "Finite-difference check of the converter's analytic gradient");
  gc->add_option("--config", gc_config)->check(CLI::IsMember({"tiny"}))->capture_default_str();
  gc->add_option("--seed", seed)->required();
  gc->callback([&] {
    action = [&] {
      const TinyGradCheckSetup s = tiny_grad_check_setup();
      const ConverterGradCheck c =
          check_converter_gradient(s.converter, s.prompt_frames, s.content_frames, s.loss, seed);
      out << std::setprecision(6) << "parameters\t" << c.result.checked << "\nmax_relative_error\t"
          << c.result.max_rel_error << "\n";
      if (!(c.result.max_rel_error < 1e-4)) throw Error(Errc::invalid_argument, "gradient check failed");
    };
  });

  std::vector<char*> raw;
  raw.reserve(argv.size());
  for (const auto& a : argv) raw.push_back(const_cast<char*>(a.c_str()));
  try {
    app.parse(static_cast<int>(raw.size()), raw.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (action) action();
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace promptvc::cli
