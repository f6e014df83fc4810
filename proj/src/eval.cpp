// SPDX-License-Identifier: Apache-2.0
#include "vtts/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

namespace fs = std::filesystem;

namespace vtts::eval {

acoustic::ForwardResult synthesize(const acoustic::Model& model, const SynthesisRequest& req) {
  if (model.front_end == acoustic::FrontEnd::Visual) {
    textimg::RenderSpec spec = model.render_spec;
    spec.synthetic_variant = req.typeface_variant;
    auto image = textimg::render(req.text, spec, req.decorations);
    auto slices = slicer::slice(image, model.slice_spec);
    acoustic::ForwardInput input;
    input.slices = &slices;
    return acoustic::forward(model, input);
  }
  auto cps = utf8_decode(req.text);
  acoustic::ForwardInput input;
  input.text = &cps;
  return acoustic::forward(model, input);
}

Mat char_feature(const acoustic::Model& model, uint32_t cp, int variant) {
  if (model.front_end != acoustic::FrontEnd::Visual)
    throw InputError("char_feature: needs a visual-front-end model");
  textimg::RenderSpec spec = model.render_spec;
  spec.synthetic_variant = variant;
  auto image = textimg::render(std::vector<uint32_t>{cp}, spec);
  auto slices = slicer::slice(image, model.slice_spec);
  auto seq = features::extract(slices, model.params, model.stats, model.fe_cfg,
                               nn::Mode::Eval);
  return seq.features;
}

Mat cell_feature(const acoustic::Model& model, const Mat& cell) {
  if (model.front_end != acoustic::FrontEnd::Visual)
    throw InputError("cell_feature: needs a visual-front-end model");
  auto image = textimg::image_from_cells({cell}, model.render_spec);
  auto slices = slicer::slice(image, model.slice_spec);
  auto seq = features::extract(slices, model.params, model.stats, model.fe_cfg,
                               nn::Mode::Eval);
  return seq.features;
}

namespace {

double l2_row_distance(const Mat& a, const Mat& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.a.size(); ++i) {
    double d = a.a[i] - b.a[i];
    s += d * d;
  }
  return std::sqrt(s);
}

struct SpanMeans {
  double span = 0.0;
  double remainder = 0.0;
  double contrast() const { return span - remainder; }
};

SpanMeans span_means(const std::vector<double>& pitch, int start, int end) {
  double in = 0.0, out = 0.0;
  int n_in = 0, n_out = 0;
  for (size_t i = 0; i < pitch.size(); ++i) {
    if (static_cast<int>(i) >= start && static_cast<int>(i) < end) {
      in += pitch[i];
      ++n_in;
    } else {
      out += pitch[i];
      ++n_out;
    }
  }
  if (n_in == 0 || n_out == 0)
    throw InputError("span_means: span must leave characters on both sides");
  return {in / n_in, out / n_out};
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

EmphasisReport eval_emphasis(const acoustic::Model& model,
                             const std::vector<data::UtteranceRecord>& records) {
  EmphasisReport report;
  int positive = 0, exceeds = 0;
  for (const auto& rec : records) {
    if (rec.decorations.empty()) continue;
    const auto& span = rec.decorations[0];
    SynthesisRequest decorated{rec.text, rec.decorations, rec.typeface_variant};
    SynthesisRequest control{rec.text, {}, rec.typeface_variant};
    auto with = synthesize(model, decorated);
    auto without = synthesize(model, control);
    EmphasisUtterance u;
    u.utterance_id = rec.utterance_id;
    SpanMeans dec = span_means(with.variance.pitch, span.start, span.end);
    u.mean_pitch_span = dec.span;
    u.mean_pitch_remainder = dec.remainder;
    u.contrast_decorated = dec.contrast();
    u.contrast_control = span_means(without.variance.pitch, span.start, span.end).contrast();
    if (u.contrast_decorated > 0) ++positive;
    if (u.contrast_decorated > u.contrast_control) ++exceeds;
    report.utterances.push_back(u);
  }
  if (!report.utterances.empty()) {
    report.fraction_decorated_positive =
        static_cast<double>(positive) / report.utterances.size();
    report.fraction_exceeds_control =
        static_cast<double>(exceeds) / report.utterances.size();
  }
  return report;
}

EmotionReport eval_emotion(const acoustic::Model& model,
                           const std::vector<data::UtteranceRecord>& records, int variant_low,
                           int variant_high) {
  EmotionReport report;
  report.variant_low = variant_low;
  report.variant_high = variant_high;
  int correct = 0;
  for (const auto& rec : records) {
    SynthesisRequest lo{rec.text, {}, variant_low};
    SynthesisRequest hi{rec.text, {}, variant_high};
    EmotionUtterance u;
    u.utterance_id = rec.utterance_id;
    u.mean_pitch_low = mean(synthesize(model, lo).variance.pitch);
    u.mean_pitch_high = mean(synthesize(model, hi).variance.pitch);
    if (u.mean_pitch_high > u.mean_pitch_low) ++correct;
    report.utterances.push_back(u);
  }
  if (!report.utterances.empty())
    report.fraction_correct_order = static_cast<double>(correct) / report.utterances.size();
  return report;
}

OovReport eval_oov(const acoustic::Model& visual_model, const acoustic::Model& baseline_model,
                   const data::CorpusStats& train_stats,
                   const std::vector<data::UtteranceRecord>& test_records,
                   const data::TemplateUniverse& universe,
                   std::pair<uint32_t, uint32_t> oov_pair) {
  OovReport report;
  for (const auto& rec : test_records) {
    int split = static_cast<int>(data::classify_sentence(rec.text, train_stats));
    auto ref = utf8_decode(rec.text);
    for (int which = 0; which < 2; ++which) {
      const acoustic::Model& model = which == 0 ? visual_model : baseline_model;
      SplitScore* scores = which == 0 ? report.visual : report.baseline;
      SynthesisRequest req{rec.text, {}, rec.typeface_variant};
      auto res = synthesize(model, req);
      std::string hyp =
          data::decode_mel_by_template(res.mel, res.variance.durations_used, universe);
      scores[split].edits +=
          static_cast<long long>(data::edit_distance(ref, utf8_decode(hyp)));
      scores[split].ref_len += static_cast<long long>(ref.size());
      scores[split].sentences += 1;
    }
  }
  Mat fa = char_feature(visual_model, oov_pair.first);
  Mat fb = char_feature(visual_model, oov_pair.second);
  report.visual_oov_feature_distance = l2_row_distance(fa, fb);
  Mat ea = acoustic::baseline_embed({oov_pair.first}, baseline_model.vocab,
                                    baseline_model.params);
  Mat eb = acoustic::baseline_embed({oov_pair.second}, baseline_model.vocab,
                                    baseline_model.params);
  report.baseline_oov_embed_distance = l2_row_distance(ea, eb);
  return report;
}

CompositionalityReport compositionality_probe(const acoustic::Model& visual_model,
                                              const std::vector<uint32_t>& seen_chars,
                                              const std::vector<uint32_t>& probe_chars) {
  CompositionalityReport report;
  std::vector<Mat> seen_feats;
  seen_feats.reserve(seen_chars.size());
  for (uint32_t cp : seen_chars) seen_feats.push_back(char_feature(visual_model, cp));
  double sum_same = 0.0, sum_disj = 0.0;
  long long n_same = 0, n_disj = 0;
  for (uint32_t probe : probe_chars) {
    Mat f = char_feature(visual_model, probe);
    int pp = textimg::composed_top(probe);
    int pq = textimg::composed_bottom(probe);
    for (size_t i = 0; i < seen_chars.size(); ++i) {
      int sp = textimg::composed_top(seen_chars[i]);
      int sq = textimg::composed_bottom(seen_chars[i]);
      double d = l2_row_distance(f, seen_feats[i]);
      if (sp == pp || sq == pq) {
        sum_same += d;
        ++n_same;
      } else {
        sum_disj += d;
        ++n_disj;
      }
    }
  }
  if (n_same) report.mean_same_component = sum_same / n_same;
  if (n_disj) report.mean_disjoint = sum_disj / n_disj;
  report.probes = static_cast<int>(probe_chars.size());
  return report;
}

// --------------------------------------------------------------- protocols

namespace {

std::vector<std::vector<uint32_t>> random_texts(Rng& rng, const std::vector<uint32_t>& alphabet,
                                                int count, int min_len, int max_len) {
  std::vector<std::vector<uint32_t>> texts;
  for (int i = 0; i < count; ++i) {
    int len = rng.uniform_int(min_len, max_len);
    std::vector<uint32_t> t;
    for (int j = 0; j < len; ++j)
      t.push_back(alphabet[rng.uniform_int(0, static_cast<int>(alphabet.size()) - 1)]);
    texts.push_back(std::move(t));
  }
  return texts;
}

std::vector<uint32_t> letters(int count) {
  std::vector<uint32_t> a;
  for (int i = 0; i < count; ++i) a.push_back('a' + i);
  return a;
}

// Letters whose glyph bottom row is mostly empty, so an underline always
// changes the rendered cell. A glyph that already fills its bottom row is
// indistinguishable from its underlined form and would carry contradictory
// prosody targets.
std::vector<uint32_t> underline_visible_letters(int count) {
  std::vector<uint32_t> out;
  std::vector<uint32_t> pool;
  for (uint32_t cp = 'a'; cp <= 'z'; ++cp) pool.push_back(cp);
  for (uint32_t cp = 'A'; cp <= 'Z'; ++cp) pool.push_back(cp);
  for (uint32_t cp : pool) {
    if (static_cast<int>(out.size()) >= count) break;
    auto bm = textimg::synthetic_glyph_bitmap(cp, 0);
    int bottom_ink = 0;
    for (int c = 0; c < textimg::GlyphBitmap::kCols; ++c)
      bottom_ink += bm.at(textimg::GlyphBitmap::kRows - 1, c);
    if (bottom_ink <= 3) out.push_back(cp);
  }
  if (static_cast<int>(out.size()) < count)
    throw std::runtime_error("emphasis protocol: not enough underline-visible letters");
  return out;
}

}  // namespace

ProtocolPaths build_emphasis_protocol(uint64_t seed, const std::string& out_dir,
                                      int train_size, int holdout_size) {
  data::SynthSpec spec;
  spec.seed = seed;
  spec.size = train_size;
  spec.alphabet = underline_visible_letters(16);
  spec.emphasis = data::EmphasisMode::PitchShift;
  spec.min_len = 4;
  spec.max_len = 7;
  spec.id_prefix = "emp";
  data::make_synthetic_corpus(spec, (fs::path(out_dir) / "train").string());
  data::SynthSpec held = spec;
  held.seed = splitmix64(seed ^ 0x686F6C64ULL);
  held.size = holdout_size;
  held.id_prefix = "hld";
  data::make_synthetic_corpus(held, (fs::path(out_dir) / "heldout").string());
  return {(fs::path(out_dir) / "train" / "manifest.tsv").string(),
          (fs::path(out_dir) / "heldout" / "manifest.tsv").string()};
}

ProtocolPaths build_emotion_protocol(uint64_t seed, const std::string& out_dir,
                                     int train_size, int holdout_size, double shift) {
  data::SynthSpec spec;
  spec.seed = seed;
  spec.size = train_size;
  spec.alphabet = letters(16);
  // variants shift pitch and tempo together (low pitch + slow, high pitch +
  // fast); the tempo difference keeps the typeface identity observable to
  // the duration objective as well
  spec.variant_map[0] = {-shift, 1.25};
  spec.variant_map[1] = {+shift, 0.75};
  spec.min_len = 4;
  spec.max_len = 7;
  spec.id_prefix = "emo";
  data::make_synthetic_corpus(spec, (fs::path(out_dir) / "train").string());
  data::SynthSpec held = spec;
  held.seed = splitmix64(seed ^ 0x686F6C64ULL);
  held.size = holdout_size;
  held.id_prefix = "hld";
  data::make_synthetic_corpus(held, (fs::path(out_dir) / "heldout").string());
  return {(fs::path(out_dir) / "train" / "manifest.tsv").string(),
          (fs::path(out_dir) / "heldout" / "manifest.tsv").string()};
}

OovProtocol build_oov_protocol(uint64_t seed, const std::string& out_dir, int train_size,
                               int test_per_split) {
  // 7x7 component pairs; 21 pairs (three q offsets per p) are held out as
  // OOV, leaving every component seen four times in training characters and
  // a >= 20-glyph probe inventory for the compositionality check
  constexpr int kComponents = 7;
  OovProtocol proto;
  std::set<uint32_t> oov_set, rare_set;
  for (int p = 0; p < kComponents; ++p) {
    oov_set.insert(textimg::composed_codepoint(p, (p + 1) % kComponents));
    oov_set.insert(textimg::composed_codepoint(p, (p + 2) % kComponents));
    oov_set.insert(textimg::composed_codepoint(p, (p + 3) % kComponents));
  }
  for (int p = 0; p < 4; ++p) {
    uint32_t cp = textimg::composed_codepoint(p, p);
    if (!oov_set.count(cp)) rare_set.insert(cp);
  }
  std::vector<uint32_t> all_chars;
  for (int p = 0; p < kComponents; ++p)
    for (int q = 0; q < kComponents; ++q) {
      uint32_t cp = textimg::composed_codepoint(p, q);
      all_chars.push_back(cp);
      if (oov_set.count(cp)) continue;
      if (rare_set.count(cp))
        proto.rare_chars.push_back(cp);
      else
        proto.common_chars.push_back(cp);
    }
  proto.oov_chars.assign(oov_set.begin(), oov_set.end());
  proto.oov_pair = {proto.oov_chars[0], proto.oov_chars[1]};
  proto.universe.style = data::AlphabetStyle::Composed;
  proto.universe.n_mels = 80;
  proto.universe.chars = all_chars;

  data::SynthSpec spec;
  spec.style = data::AlphabetStyle::Composed;
  spec.alphabet = all_chars;  // validated as a whole; texts control usage
  spec.min_len = 4;
  spec.max_len = 6;

  // deterministic retries until the frequency classes hold
  for (int attempt = 0;; ++attempt) {
    if (attempt > 100) throw std::runtime_error("oov protocol: frequency control failed");
    uint64_t s = splitmix64(seed ^ (0x6F6F76ULL + attempt));
    Rng rng(s);
    auto texts = random_texts(rng, proto.common_chars, train_size, spec.min_len, spec.max_len);
    // inject each rare character exactly twice, each into a distinct slot
    std::set<std::pair<int, int>> used;
    for (uint32_t rare_cp : proto.rare_chars) {
      for (int k = 0; k < 2; ++k) {
        while (true) {
          int t = rng.uniform_int(0, static_cast<int>(texts.size()) - 1);
          int j = rng.uniform_int(0, static_cast<int>(texts[t].size()) - 1);
          if (used.count({t, j})) continue;
          used.insert({t, j});
          texts[t][j] = rare_cp;
          break;
        }
      }
    }
    std::vector<std::string> as_strings;
    for (const auto& t : texts) as_strings.push_back(utf8_encode(t));
    auto stats = data::CorpusStats::from_texts(as_strings);
    bool ok = true;
    for (uint32_t cp : proto.common_chars)
      if (stats.count_of(cp) < 3) ok = false;
    for (uint32_t cp : proto.rare_chars)
      if (stats.count_of(cp) < 1 || stats.count_of(cp) > 2) ok = false;
    for (uint32_t cp : proto.oov_chars)
      if (stats.count_of(cp) != 0) ok = false;
    if (!ok) continue;

    data::SynthSpec train_spec = spec;
    train_spec.seed = s;
    train_spec.size = train_size;
    train_spec.id_prefix = "tr";
    data::materialize_corpus(train_spec, texts, (fs::path(out_dir) / "train").string());

    // test sentences per split
    Rng trng(splitmix64(s ^ 0x74657374ULL));
    std::vector<std::vector<uint32_t>> test_texts;
    auto inject = [&](std::vector<uint32_t>& t, const std::vector<uint32_t>& pool, int count) {
      std::set<int> positions;
      while (static_cast<int>(positions.size()) < count) {
        positions.insert(trng.uniform_int(0, static_cast<int>(t.size()) - 1));
      }
      for (int pos : positions)
        t[pos] = pool[trng.uniform_int(0, static_cast<int>(pool.size()) - 1)];
    };
    for (int i = 0; i < test_per_split; ++i) {
      auto t = random_texts(trng, proto.common_chars, 1, spec.min_len, spec.max_len)[0];
      test_texts.push_back(t);
    }
    for (int i = 0; i < test_per_split; ++i) {
      auto t = random_texts(trng, proto.common_chars, 1, spec.min_len, spec.max_len)[0];
      inject(t, proto.rare_chars, trng.uniform_int(1, 2));
      test_texts.push_back(t);
    }
    for (int i = 0; i < test_per_split; ++i) {
      auto t = random_texts(trng, proto.common_chars, 1, spec.min_len, spec.max_len)[0];
      inject(t, proto.oov_chars, trng.uniform_int(1, 2));
      test_texts.push_back(t);
    }
    data::SynthSpec test_spec = spec;
    test_spec.seed = splitmix64(s ^ 0x7465ULL);
    test_spec.size = static_cast<int>(test_texts.size());
    test_spec.id_prefix = "te";
    data::materialize_corpus(test_spec, test_texts, (fs::path(out_dir) / "test").string());

    // the labels the evaluator will assign must match the intent
    std::vector<data::SplitLabel> want;
    for (int i = 0; i < test_per_split; ++i) want.push_back(data::SplitLabel::InVocab);
    for (int i = 0; i < test_per_split; ++i) want.push_back(data::SplitLabel::Rare);
    for (int i = 0; i < test_per_split; ++i) want.push_back(data::SplitLabel::Oov);
    bool labels_ok = true;
    for (size_t i = 0; i < test_texts.size(); ++i)
      if (data::classify_sentence(utf8_encode(test_texts[i]), stats) != want[i])
        labels_ok = false;
    if (!labels_ok) continue;
    break;
  }
  proto.train_manifest = (fs::path(out_dir) / "train" / "manifest.tsv").string();
  proto.test_manifest = (fs::path(out_dir) / "test" / "manifest.tsv").string();
  return proto;
}

}  // namespace vtts::eval
