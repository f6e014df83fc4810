// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "vtts/config.hpp"
#include "vtts/eval.hpp"
#include "vtts/tensor_io.hpp"
#include "vtts/train.hpp"

using namespace vtts;

namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

int run_cli(const std::string& args, std::string* output = nullptr) {
  std::string cmd = std::string(VTTS_CLI_PATH) + " " + args;
  std::string out_file =
      (fs::temp_directory_path() / ("vtts_cli_out_" + std::to_string(rand()) + ".txt"))
          .string();
  cmd += " > " + out_file + " 2>&1";
  int rc = std::system(cmd.c_str());
  if (output) {
    std::ifstream is(out_file);
    output->assign(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>{});
  }
  fs::remove(out_file);
  return WEXITSTATUS(rc);
}

struct TinySetup {
  std::string manifest;
  std::string checkpoint;
};

TinySetup tiny_trained(const std::string& name) {
  data::SynthSpec spec;
  spec.seed = 41;
  spec.size = 6;
  spec.alphabet = {'a', 'b', 'c', 'd'};
  spec.n_mels = 20;
  spec.min_len = 3;
  spec.max_len = 4;
  std::string dir = fresh_dir(name);
  data::make_synthetic_corpus(spec, dir + "/corpus");

  train::TrainConfig t;
  t.seed = 9;
  t.batch_size = 3;
  t.max_steps = 2;
  t.context_c = 1;
  t.threads = 1;
  textimg::RenderSpec r;
  r.char_width_px = 12;
  r.char_height_px = 12;
  features::ExtractorConfig fe;
  fe.output_dim = 32;
  acoustic::AcousticConfig ac;
  ac.model_dim = 32;
  ac.encoder_blocks = 1;
  ac.decoder_blocks = 1;
  ac.ff_conv_kernel = 3;
  ac.ff_hidden = 32;
  ac.predictor_hidden = 16;
  ac.n_mels = 20;
  ac.pitch_bins = 16;
  ac.energy_bins = 16;
  ac.dropout = 0.0;
  auto res = train::fit(t, r, fe, ac, dir + "/corpus/manifest.tsv", dir + "/run");
  return {dir + "/corpus/manifest.tsv", res.final_checkpoint};
}

}  // namespace

TEST_CASE("config files parse, serialize and reject unknown keys") {
  std::string text =
      "# comment\n"
      "render.w=30\n"
      "render.h=30\n"
      "slice.c=3\n"
      "train.max_steps=100\n";
  auto cfg = config::parse_config_text(text);
  CHECK(cfg.render.char_width_px == 30);
  CHECK(cfg.slice.context_chars == 3);
  CHECK(cfg.train.context_c == 3);
  CHECK(cfg.train.max_steps == 100);
  CHECK(cfg.extractor.input_width == 90);
  CHECK_THROWS_WITH_AS(config::parse_config_text("no.such.key=1\n"),
                       doctest::Contains("no.such.key"), ConfigError);
  CHECK_THROWS_AS(config::parse_config_text("slice.c=two\n"), ConfigError);
  // round trip through text keeps values
  auto cfg2 = config::parse_config_text(config::to_text(cfg));
  CHECK(cfg2.render.char_width_px == cfg.render.char_width_px);
  CHECK(cfg2.slice.context_chars == cfg.slice.context_chars);
  CHECK(cfg2.train.max_steps == cfg.train.max_steps);
}

TEST_CASE("synthesize equals the manually composed pipeline") {
  auto setup = tiny_trained("vtts_cli_pipeline");
  auto model = train::load_model(setup.checkpoint);
  std::string text = "abc";
  eval::SynthesisRequest req{text, {}, 0};
  auto got = eval::synthesize(model, req);

  // manual composition: render -> slice -> extract -> encode ->
  // variance_adapt -> decode
  auto image = textimg::render(text, model.render_spec);
  auto slices = slicer::slice(image, model.slice_spec);
  auto feats = features::extract(slices, model.params, model.stats, model.fe_cfg,
                                 nn::Mode::Eval);
  Mat hidden = acoustic::encode(feats.features, model);
  auto [regulated, pred] = acoustic::variance_adapt(hidden, model, nullptr);
  auto mel = acoustic::decode(regulated, model);
  CHECK(bit_equal(got.mel, mel.frames));
  CHECK(got.variance.durations_used == pred.durations_used);
}

TEST_CASE("cli renders images and slices with the expected file layout") {
  std::string out = fresh_dir("vtts_cli_render");
  std::string cfg_path = out + "/cfg.txt";
  {
    std::ofstream os(cfg_path);
    os << "slice.c=3\n";
  }
  std::string output;
  int rc = run_cli("--config " + cfg_path + " --out " + out + " render abc", &output);
  CHECK(rc == 0);
  CHECK(fs::exists(out + "/image.pgm"));
  CHECK(fs::exists(out + "/slice_000.pgm"));
  CHECK(fs::exists(out + "/slice_002.pgm"));
  CHECK_FALSE(fs::exists(out + "/slice_003.pgm"));
  fs::remove_all(out);
}

TEST_CASE("cli rejects an even slice context with a message naming the flag") {
  std::string out = fresh_dir("vtts_cli_badc");
  std::string cfg_path = out + "/cfg.txt";
  {
    std::ofstream os(cfg_path);
    os << "slice.c=2\n";
  }
  std::string output;
  int rc = run_cli("--config " + cfg_path + " --out " + out + " render abc", &output);
  CHECK(rc != 0);
  CHECK(output.find("slice") != std::string::npos);
  CHECK(output.find("odd") != std::string::npos);
  fs::remove_all(out);
}

TEST_CASE("cli renders empty text to a zero-width image and no slices") {
  std::string out = fresh_dir("vtts_cli_empty");
  std::string output;
  int rc = run_cli("--out " + out + " render \"\"", &output);
  CHECK(rc == 0);
  CHECK(fs::exists(out + "/image.pgm"));
  CHECK_FALSE(fs::exists(out + "/slice_000.pgm"));
  fs::remove_all(out);
}

TEST_CASE("cli cer subcommand prints the rate") {
  std::string output;
  int rc = run_cli("cer abc abd", &output);
  CHECK(rc == 0);
  CHECK(output.find("0.333") != std::string::npos);
  rc = run_cli("cer \"\" abd", &output);
  CHECK(rc != 0);
}

TEST_CASE("cli make-corpus writes a loadable manifest") {
  std::string out = fresh_dir("vtts_cli_corpus");
  std::string output;
  int rc = run_cli("--seed 3 --out " + out + " make-corpus --size 5", &output);
  CHECK(rc == 0);
  auto records = data::load_manifest(out + "/manifest.tsv");
  CHECK(records.size() == 5);
  fs::remove_all(out);
}

TEST_CASE("cli synth writes a mel tensor and a wav with the length law") {
  auto setup = tiny_trained("vtts_cli_synth");
  std::string out = fresh_dir("vtts_cli_synth_out");
  std::string output;
  int rc = run_cli("--out " + out + " synth ab --checkpoint " + setup.checkpoint +
                       " --wav --gl-iterations 4",
                   &output);
  CHECK(rc == 0);
  Mat mel = io::read_tensor_mat(out + "/mel.vt");
  auto model = train::load_model(setup.checkpoint);
  eval::SynthesisRequest req{"ab", {}, 0};
  auto res = eval::synthesize(model, req);
  // the tensor file stores 32-bit values; compare at file precision
  REQUIRE(mel.same_shape(res.mel));
  for (size_t i = 0; i < mel.a.size(); ++i)
    CHECK(mel.a[i] == static_cast<double>(static_cast<float>(res.mel.a[i])));
  long long total = 0;
  for (int d : res.variance.durations_used) total += d;
  CHECK(mel.rows == static_cast<int>(total));
  std::ifstream wav(out + "/synth.wav", std::ios::binary);
  std::string bytes(std::istreambuf_iterator<char>(wav), std::istreambuf_iterator<char>{});
  CHECK(bytes.size() == 44 + 2u * static_cast<size_t>(mel.rows) * 256u);
  // identical call produces an identical mel file
  std::string out2 = fresh_dir("vtts_cli_synth_out2");
  rc = run_cli("--out " + out2 + " synth ab --checkpoint " + setup.checkpoint, &output);
  CHECK(rc == 0);
  CHECK(bit_equal(io::read_tensor_mat(out2 + "/mel.vt"), mel));
  fs::remove_all(out);
  fs::remove_all(out2);
}

TEST_CASE("an untrained model shows no systematic emphasis contrast") {
  // fresh-seed model, full geometry; decorated-vs-plain pitch contrast over
  // >= 50 utterances should hover near chance
  std::string dir = fresh_dir("vtts_cli_untrained");
  auto proto = eval::build_emphasis_protocol(9100, dir, 3, 60);
  train::TrainConfig t;
  t.seed = 2024;
  t.context_c = 1;
  auto state = train::init_training(t, {}, {}, {}, {});
  auto holdout = data::load_manifest(proto.heldout_manifest);
  auto report = eval::eval_emphasis(state.model, holdout);
  REQUIRE(report.utterances.size() >= 50);
  CHECK(report.fraction_decorated_positive >= 0.2);
  CHECK(report.fraction_decorated_positive <= 0.8);
  fs::remove_all(dir);
}

TEST_CASE("cli synth refuses a baseline checkpoint") {
  data::SynthSpec spec;
  spec.seed = 43;
  spec.size = 5;
  spec.alphabet = {'a', 'b', 'c'};
  spec.n_mels = 20;
  spec.min_len = 3;
  spec.max_len = 4;
  std::string dir = fresh_dir("vtts_cli_base");
  data::make_synthetic_corpus(spec, dir + "/corpus");
  train::TrainConfig t;
  t.seed = 9;
  t.batch_size = 2;
  t.max_steps = 1;
  t.context_c = 1;
  t.threads = 1;
  t.front_end = acoustic::FrontEnd::Baseline;
  textimg::RenderSpec r;
  r.char_width_px = 12;
  r.char_height_px = 12;
  features::ExtractorConfig fe;
  fe.output_dim = 32;
  acoustic::AcousticConfig ac;
  ac.model_dim = 32;
  ac.encoder_blocks = 1;
  ac.decoder_blocks = 1;
  ac.ff_conv_kernel = 3;
  ac.ff_hidden = 32;
  ac.predictor_hidden = 16;
  ac.n_mels = 20;
  ac.pitch_bins = 16;
  ac.energy_bins = 16;
  ac.dropout = 0.0;
  auto res = train::fit(t, r, fe, ac, dir + "/corpus/manifest.tsv", dir + "/run");
  std::string output;
  int rc = run_cli("--out " + dir + " synth ab --checkpoint " + res.final_checkpoint,
                   &output);
  CHECK(rc != 0);
  CHECK(output.find("visual") != std::string::npos);
  fs::remove_all(dir);
}
