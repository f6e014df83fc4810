// SPDX-License-Identifier: Apache-2.0
//
// _vtts: python bindings for the main pipeline operations.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "vtts/audio.hpp"
#include "vtts/config.hpp"
#include "vtts/eval.hpp"
#include "vtts/tensor_io.hpp"
#include "vtts/train.hpp"

namespace py = pybind11;
using namespace vtts;

namespace {

py::array_t<double> mat_to_array(const Mat& m) {
  py::array_t<double> out({m.rows, m.cols});
  std::copy(m.a.begin(), m.a.end(), out.mutable_data());
  return out;
}

Mat array_to_mat(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw InputError("expected a 2-D array");
  Mat m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.a.begin());
  return m;
}

std::vector<textimg::Decoration> decorations_from_tuples(
    const std::vector<std::tuple<std::string, int, int>>& decos) {
  std::vector<textimg::Decoration> out;
  for (const auto& [kind, start, end] : decos)
    out.push_back({textimg::decoration_kind_from_string(kind), start, end});
  return out;
}

config::ExperimentConfig config_from_dict(const py::dict& d) {
  config::ExperimentConfig cfg;
  for (auto item : d)
    config::apply_key(cfg, py::cast<std::string>(item.first),
                      py::cast<std::string>(py::str(item.second)));
  cfg.finalize();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_vtts, m) {
  m.doc() = "visual-text to speech: render text as glyph images, extract visual "
            "features, synthesize mel spectrograms";

  py::register_exception<ConfigError>(m, "VttsConfigError");
  py::register_exception<InputError>(m, "VttsInputError");
  py::register_exception<IoError>(m, "VttsIoError");

  m.def(
      "render",
      [](const std::string& text, int w, int h, int variant,
         const std::vector<std::tuple<std::string, int, int>>& decorations) {
        textimg::RenderSpec spec;
        spec.char_width_px = w;
        spec.char_height_px = h;
        spec.synthetic_variant = variant;
        auto img = textimg::render(text, spec, decorations_from_tuples(decorations));
        return mat_to_array(img.pixels);
      },
      py::arg("text"), py::arg("w") = 30, py::arg("h") = 30, py::arg("variant") = 0,
      py::arg("decorations") = std::vector<std::tuple<std::string, int, int>>{},
      "Render text with the synthetic font into an (h, n*w) float image.");

  m.def(
      "slice_image",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& image, int w,
         int c) {
        Mat px = array_to_mat(image);
        if (w <= 0 || px.cols % w != 0) throw InputError("image width must be n*w");
        textimg::VisualTextImage img;
        img.pixels = px;
        img.char_count = px.cols / w;
        img.spec.char_width_px = w;
        img.spec.char_height_px = px.rows;
        auto seq = slicer::slice(img, slicer::SliceSpec{c});
        py::array_t<double> out({img.char_count, px.rows, w * c});
        double* dst = out.mutable_data();
        for (const auto& s : seq.slices) {
          std::copy(s.a.begin(), s.a.end(), dst);
          dst += s.a.size();
        }
        return out;
      },
      py::arg("image"), py::arg("w"), py::arg("c"),
      "Slice an image into per-character windows of width w*c.");

  m.def(
      "synthetic_glyph",
      [](uint32_t codepoint, int variant) {
        auto bm = textimg::synthetic_glyph_bitmap(codepoint, variant);
        py::array_t<uint8_t> out({7, 5});
        std::copy(bm.bits.begin(), bm.bits.end(), out.mutable_data());
        return out;
      },
      py::arg("codepoint"), py::arg("variant") = 0,
      "7x5 procedural glyph bitmap of a codepoint.");

  m.def("cer", &data::cer, py::arg("reference"), py::arg("hypothesis"),
        "Character error rate: edit distance / reference length.");

  m.def(
      "classify_sentence",
      [](const std::string& text, const std::map<std::string, long long>& counts,
         long long threshold) {
        data::CorpusStats stats;
        for (const auto& [ch, n] : counts) {
          auto cps = utf8_decode(ch);
          if (cps.size() != 1) throw InputError("counts keys must be single characters");
          stats.counts[cps[0]] = n;
        }
        return data::to_string(data::classify_sentence(text, stats, threshold));
      },
      py::arg("text"), py::arg("counts"), py::arg("threshold") = 3,
      "Label a sentence in_vocab / rare / oov against training counts.");

  m.def(
      "write_tensor",
      [](const std::string& path,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
        io::write_tensor(path, array_to_mat(a));
      },
      py::arg("path"), py::arg("array"), "Write a 2-D array as a VTTS tensor file.");

  m.def(
      "read_tensor",
      [](const std::string& path) { return mat_to_array(io::read_tensor_mat(path)); },
      py::arg("path"), "Read a 2-D VTTS tensor file.");

  m.def(
      "make_corpus",
      [](const std::string& out_dir, uint64_t seed, int size, const std::string& style,
         const std::string& emphasis, const std::string& alphabet) {
        data::SynthSpec spec;
        spec.seed = seed;
        spec.size = size;
        if (style == "composed") {
          spec.style = data::AlphabetStyle::Composed;
          for (int p = 0; p < 6; ++p)
            for (int q = 0; q < 6; ++q)
              spec.alphabet.push_back(textimg::composed_codepoint(p, q));
        } else {
          for (uint32_t cp : utf8_decode(alphabet)) spec.alphabet.push_back(cp);
        }
        if (emphasis == "pitch_shift") spec.emphasis = data::EmphasisMode::PitchShift;
        data::make_synthetic_corpus(spec, out_dir);
        return out_dir + "/manifest.tsv";
      },
      py::arg("out_dir"), py::arg("seed") = 0, py::arg("size") = 20,
      py::arg("style") = "plain", py::arg("emphasis") = "off",
      py::arg("alphabet") = "abcdefghijklmnop",
      "Generate a deterministic synthetic corpus; returns the manifest path.");

  m.def(
      "fit",
      [](const py::dict& config, const std::string& manifest, const std::string& out_dir) {
        auto cfg = config_from_dict(config);
        auto res = train::fit(cfg.train, cfg.render, cfg.extractor, cfg.acoustic, manifest,
                              out_dir);
        py::dict out;
        out["checkpoint"] = res.final_checkpoint;
        out["loss_log"] = res.loss_log;
        out["steps"] = res.steps_run;
        out["mel_l1"] = res.final_loss.mel_l1;
        out["total"] = res.final_loss.total;
        return out;
      },
      py::arg("config"), py::arg("manifest"), py::arg("out_dir"),
      "Train on a manifest; returns checkpoint info.");

  m.def(
      "synthesize",
      [](const std::string& checkpoint, const std::string& text,
         const std::vector<std::tuple<std::string, int, int>>& decorations, int variant) {
        auto model = train::load_model(checkpoint);
        eval::SynthesisRequest req{text, decorations_from_tuples(decorations), variant};
        auto res = eval::synthesize(model, req);
        py::dict out;
        out["mel"] = mat_to_array(res.mel);
        out["durations"] = res.variance.durations_used;
        out["pitch"] = res.variance.pitch;
        out["energy"] = res.variance.energy;
        return out;
      },
      py::arg("checkpoint"), py::arg("text"),
      py::arg("decorations") = std::vector<std::tuple<std::string, int, int>>{},
      py::arg("variant") = 0, "Synthesize a mel spectrogram from text via a checkpoint.");

  m.def(
      "griffin_lim",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& mel,
         int iterations) {
        Mat m = array_to_mat(mel);
        audio::StftConfig cfg;
        cfg.n_mels = m.cols;
        auto wave = audio::griffin_lim(m, iterations, cfg);
        py::array_t<double> out(static_cast<py::ssize_t>(wave.size()));
        std::copy(wave.begin(), wave.end(), out.mutable_data());
        return out;
      },
      py::arg("mel"), py::arg("iterations") = 60,
      "Invert a mel spectrogram to a waveform with Griffin-Lim.");

  m.def(
      "write_wav",
      [](const std::string& path,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& samples,
         int sample_rate) {
        std::vector<double> v(samples.data(), samples.data() + samples.size());
        audio::write_wav(path, v, sample_rate);
      },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate") = 22050,
      "Write 16-bit mono PCM.");

  m.attr("__version__") = "0.1.0";
}
