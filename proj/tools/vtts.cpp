// SPDX-License-Identifier: Apache-2.0
//
// vtts command line: rendering previews, corpus generation, training,
// synthesis with Griffin-Lim waveform export, and the evaluation protocols.
#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "vtts/audio.hpp"
#include "vtts/config.hpp"
#include "vtts/eval.hpp"
#include "vtts/tensor_io.hpp"
#include "vtts/train.hpp"

namespace fs = std::filesystem;
using namespace vtts;

namespace {

std::vector<textimg::Decoration> parse_decorations(const std::string& field) {
  std::vector<textimg::Decoration> out;
  if (field.empty() || field == "-") return out;
  size_t pos = 0;
  while (pos <= field.size()) {
    size_t next = field.find(';', pos);
    std::string part = field.substr(pos, next == std::string::npos ? next : next - pos);
    if (!part.empty()) {
      size_t c1 = part.find(':');
      size_t c2 = part.find(':', c1 == std::string::npos ? c1 : c1 + 1);
      if (c1 == std::string::npos || c2 == std::string::npos)
        throw InputError("decoration must be kind:start:end, got '" + part + "'");
      textimg::Decoration d;
      d.kind = textimg::decoration_kind_from_string(part.substr(0, c1));
      d.start = std::stoi(part.substr(c1 + 1, c2 - c1 - 1));
      d.end = std::stoi(part.substr(c2 + 1));
      out.push_back(d);
    }
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

config::ExperimentConfig load_cfg(const std::string& config_path, uint64_t* seed_flag) {
  config::ExperimentConfig cfg;
  if (!config_path.empty())
    cfg = config::load_config(config_path);
  else
    cfg.finalize();
  if (seed_flag) {
    cfg.train.seed = *seed_flag;
  }
  return cfg;
}

int run(int argc, char** argv) {
  CLI::App app{"visual-text to speech, desk scale"};
  app.require_subcommand(1);

  std::string config_path;
  uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir = "out";
  app.add_option("--config", config_path, "experiment config file (key=value)");
  auto* seed_opt = app.add_option("--seed", seed, "seed override");
  app.add_option("--out", out_dir, "output directory");

  // render
  auto* render = app.add_subcommand("render", "render text to a PGM image and slices");
  std::string text;
  std::string decorations_arg = "-";
  render->add_option("text", text, "text to render")->required();
  render->add_option("--decorations", decorations_arg, "kind:start:end;... or -");

  // slice
  auto* slice_cmd = app.add_subcommand("slice", "dump per-character slice PGMs");
  slice_cmd->add_option("text", text, "text to slice")->required();

  // make-corpus
  auto* mkc = app.add_subcommand("make-corpus", "generate a synthetic corpus");
  int corpus_size = 20;
  std::string style = "plain";
  std::string emphasis = "off";
  std::string variants;
  std::string alphabet = "abcdefghijklmnop";
  mkc->add_option("--size", corpus_size, "number of utterances");
  mkc->add_option("--style", style, "plain|composed");
  mkc->add_option("--emphasis", emphasis, "off|pitch_shift");
  mkc->add_option("--variants", variants, "variant:pitch_shift:tempo;... prosody map");
  mkc->add_option("--alphabet", alphabet, "alphabet characters (plain style)");

  // train
  auto* train_cmd = app.add_subcommand("train", "fit a model on a manifest");
  std::string manifest;
  train_cmd->add_option("--manifest", manifest, "training manifest")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "synthesize a mel (and optional waveform)");
  std::string checkpoint;
  bool wav = false;
  int variant = 0;
  int gl_iterations = 60;
  synth->add_option("text", text, "text to synthesize")->required();
  synth->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  synth->add_option("--decorations", decorations_arg, "kind:start:end;... or -");
  synth->add_option("--variant", variant, "typeface variant");
  synth->add_flag("--wav", wav, "also write a Griffin-Lim waveform");
  synth->add_option("--gl-iterations", gl_iterations, "Griffin-Lim iterations");

  // eval-emphasis
  auto* ee = app.add_subcommand("eval-emphasis", "pitch-contrast emphasis report");
  ee->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  ee->add_option("--manifest", manifest, "held-out manifest with decoration spans")
      ->required();

  // eval-emotion
  auto* em = app.add_subcommand("eval-emotion", "typeface-variant pitch separation report");
  int variant_low = 0, variant_high = 1;
  em->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  em->add_option("--manifest", manifest, "held-out manifest")->required();
  em->add_option("--variant-low", variant_low, "variant mapped to the lower shift");
  em->add_option("--variant-high", variant_high, "variant mapped to the higher shift");

  // eval-oov
  auto* eo = app.add_subcommand("eval-oov", "in-vocab/rare/OOV intelligibility report");
  std::string ckpt_visual, ckpt_baseline, train_manifest, test_manifest;
  std::string universe_style = "composed";
  eo->add_option("--checkpoint-visual", ckpt_visual, "visual checkpoint")->required();
  eo->add_option("--checkpoint-baseline", ckpt_baseline, "baseline checkpoint")->required();
  eo->add_option("--train-manifest", train_manifest, "manifest the models trained on")
      ->required();
  eo->add_option("--test-manifest", test_manifest, "test manifest")->required();
  eo->add_option("--style", universe_style, "template style: plain|composed");

  // cer
  auto* cer_cmd = app.add_subcommand("cer", "character error rate of hypothesis vs reference");
  std::string ref, hyp;
  cer_cmd->add_option("reference", ref, "reference text")->required();
  cer_cmd->add_option("hypothesis", hyp, "hypothesis text")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  seed_set = seed_opt->count() > 0;

  auto cfg = load_cfg(config_path, seed_set ? &seed : nullptr);

  if (*render) {
    auto decos = parse_decorations(decorations_arg);
    auto image = textimg::render(text, cfg.render, decos);
    fs::create_directories(out_dir);
    io::write_pgm((fs::path(out_dir) / "image.pgm").string(), image.pixels);
    auto slices = slicer::slice(image, cfg.slice);
    for (size_t i = 0; i < slices.slices.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "slice_%03zu.pgm", i);
      io::write_pgm((fs::path(out_dir) / name).string(), slices.slices[i]);
    }
    std::cout << "image " << image.pixels.rows << "x" << image.pixels.cols << ", "
              << slices.slices.size() << " slices -> " << out_dir << "\n";
  } else if (*slice_cmd) {
    auto image = textimg::render(text, cfg.render);
    auto slices = slicer::slice(image, cfg.slice);
    fs::create_directories(out_dir);
    for (size_t i = 0; i < slices.slices.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "slice_%03zu.pgm", i);
      io::write_pgm((fs::path(out_dir) / name).string(), slices.slices[i]);
    }
    std::cout << slices.slices.size() << " slices -> " << out_dir << "\n";
  } else if (*mkc) {
    data::SynthSpec spec;
    spec.seed = cfg.train.seed;
    spec.size = corpus_size;
    if (style == "composed") {
      spec.style = data::AlphabetStyle::Composed;
      for (int p = 0; p < 6; ++p)
        for (int q = 0; q < 6; ++q)
          spec.alphabet.push_back(textimg::composed_codepoint(p, q));
    } else if (style == "plain") {
      for (uint32_t cp : utf8_decode(alphabet)) spec.alphabet.push_back(cp);
    } else {
      throw ConfigError("--style must be plain|composed");
    }
    if (emphasis == "pitch_shift")
      spec.emphasis = data::EmphasisMode::PitchShift;
    else if (emphasis != "off")
      throw ConfigError("--emphasis must be off|pitch_shift");
    if (!variants.empty()) {
      for (const auto& part : [&] {
             std::vector<std::string> parts;
             size_t pos = 0;
             while (pos <= variants.size()) {
               size_t next = variants.find(';', pos);
               parts.push_back(
                   variants.substr(pos, next == std::string::npos ? next : next - pos));
               if (next == std::string::npos) break;
               pos = next + 1;
             }
             return parts;
           }()) {
        if (part.empty()) continue;
        size_t c1 = part.find(':');
        size_t c2 = part.find(':', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
          throw ConfigError("--variants must be variant:pitch_shift:tempo;...");
        data::VariantProsody p;
        p.pitch_shift = std::stod(part.substr(c1 + 1, c2 - c1 - 1));
        p.tempo_scale = std::stod(part.substr(c2 + 1));
        spec.variant_map[std::stoi(part.substr(0, c1))] = p;
      }
    }
    auto records = data::make_synthetic_corpus(spec, out_dir);
    std::cout << records.size() << " utterances -> " << out_dir << "/manifest.tsv\n";
  } else if (*train_cmd) {
    auto result = train::fit(cfg.train, cfg.render, cfg.extractor, cfg.acoustic, manifest,
                             out_dir);
    std::cout << "steps=" << result.steps_run << " final_total=" << result.final_loss.total
              << " checkpoint=" << result.final_checkpoint << "\n";
  } else if (*synth) {
    auto model = train::load_model(checkpoint);
    if (model.front_end != acoustic::FrontEnd::Visual)
      throw InputError("synth: checkpoint must have the visual front-end");
    eval::SynthesisRequest req{text, parse_decorations(decorations_arg), variant};
    auto res = eval::synthesize(model, req);
    fs::create_directories(out_dir);
    std::string mel_path = (fs::path(out_dir) / "mel.vt").string();
    io::write_tensor(mel_path, res.mel);
    std::cout << "mel " << res.mel.rows << "x" << res.mel.cols << " -> " << mel_path << "\n";
    if (wav) {
      audio::StftConfig scfg;
      scfg.n_mels = res.mel.cols;
      auto samples = audio::griffin_lim(res.mel, gl_iterations, scfg);
      std::string wav_path = (fs::path(out_dir) / "synth.wav").string();
      audio::write_wav(wav_path, samples, scfg.sample_rate);
      std::cout << "wav " << samples.size() << " samples -> " << wav_path << "\n";
    }
  } else if (*ee) {
    auto model = train::load_model(checkpoint);
    auto records = data::load_manifest(manifest);
    auto report = eval::eval_emphasis(model, records);
    std::cout << "utterances=" << report.utterances.size() << "\n"
              << "fraction_decorated_positive=" << report.fraction_decorated_positive << "\n"
              << "fraction_exceeds_control=" << report.fraction_exceeds_control << "\n";
  } else if (*em) {
    auto model = train::load_model(checkpoint);
    auto records = data::load_manifest(manifest);
    auto report = eval::eval_emotion(model, records, variant_low, variant_high);
    std::cout << "utterances=" << report.utterances.size() << "\n"
              << "fraction_correct_order=" << report.fraction_correct_order << "\n";
  } else if (*eo) {
    auto visual = train::load_model(ckpt_visual);
    auto baseline = train::load_model(ckpt_baseline);
    auto train_records = data::load_manifest(train_manifest);
    auto stats = data::CorpusStats::from_records(train_records);
    auto test_records = data::load_manifest(test_manifest);
    data::TemplateUniverse universe;
    universe.n_mels = visual.ac_cfg.n_mels;
    universe.style = universe_style == "composed" ? data::AlphabetStyle::Composed
                                                  : data::AlphabetStyle::Plain;
    std::set<uint32_t> chars;
    for (const auto& r : train_records)
      for (uint32_t cp : utf8_decode(r.text)) chars.insert(cp);
    std::vector<uint32_t> oov_candidates;
    for (const auto& r : test_records)
      for (uint32_t cp : utf8_decode(r.text))
        if (!chars.count(cp)) oov_candidates.push_back(cp);
    for (const auto& r : test_records)
      for (uint32_t cp : utf8_decode(r.text)) chars.insert(cp);
    universe.chars.assign(chars.begin(), chars.end());
    std::sort(oov_candidates.begin(), oov_candidates.end());
    oov_candidates.erase(std::unique(oov_candidates.begin(), oov_candidates.end()),
                         oov_candidates.end());
    if (oov_candidates.size() < 2)
      throw InputError("eval-oov: test manifest has fewer than two OOV characters");
    auto report = eval::eval_oov(visual, baseline, stats, test_records, universe,
                                 {oov_candidates[0], oov_candidates[1]});
    const char* names[3] = {"in_vocab", "rare", "oov"};
    for (int s = 0; s < 3; ++s)
      std::cout << "visual." << names[s] << ".cer=" << report.visual[s].cer()
                << " (n=" << report.visual[s].sentences << ")\n";
    for (int s = 0; s < 3; ++s)
      std::cout << "baseline." << names[s] << ".cer=" << report.baseline[s].cer()
                << " (n=" << report.baseline[s].sentences << ")\n";
    std::cout << "visual_oov_feature_distance=" << report.visual_oov_feature_distance << "\n"
              << "baseline_oov_embed_distance=" << report.baseline_oov_embed_distance << "\n";
  } else if (*cer_cmd) {
    std::cout << data::cer(ref, hyp) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
