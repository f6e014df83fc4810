// SPDX-License-Identifier: Apache-2.0
//
// Evaluation protocols: emphasis transfer (pitch contrast between decorated
// and plain inputs), typeface/emotion transfer (global pitch separation by
// variant), the in-vocab/rare/OOV intelligibility protocol with
// template-argmax decoding, and the feature-space compositionality probe.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vtts/acoustic.hpp"
#include "vtts/data.hpp"

namespace vtts::eval {

struct SynthesisRequest {
  std::string text;
  std::vector<textimg::Decoration> decorations;
  int typeface_variant = 0;
};

/// End-to-end eval-mode synthesis through the model's own front-end.
acoustic::ForwardResult synthesize(const acoustic::Model& model, const SynthesisRequest& req);

/// Extractor feature of one rendered character (visual models only).
Mat char_feature(const acoustic::Model& model, uint32_t cp, int variant = 0);
/// Extractor feature of one explicit glyph cell matrix (h x w).
Mat cell_feature(const acoustic::Model& model, const Mat& cell);

// ---- emphasis ----

struct EmphasisUtterance {
  std::string utterance_id;
  double mean_pitch_span = 0.0;       // decorated input, over the span
  double mean_pitch_remainder = 0.0;  // decorated input, outside the span
  double contrast_decorated = 0.0;    // span minus remainder
  double contrast_control = 0.0;      // same statistic on the undecorated input
};

struct EmphasisReport {
  std::vector<EmphasisUtterance> utterances;
  double fraction_decorated_positive = 0.0;
  double fraction_exceeds_control = 0.0;
};

/// Synthesizes every record twice (decorated and plain input) and compares
/// predicted pitch over the decorated span against the remainder.
EmphasisReport eval_emphasis(const acoustic::Model& model,
                             const std::vector<data::UtteranceRecord>& records);

// ---- emotion / typeface variant ----

struct EmotionUtterance {
  std::string utterance_id;
  double mean_pitch_low = 0.0;   // variant mapped to the lower shift
  double mean_pitch_high = 0.0;  // variant mapped to the higher shift
};

struct EmotionReport {
  std::vector<EmotionUtterance> utterances;
  double fraction_correct_order = 0.0;
  int variant_low = 0;
  int variant_high = 1;
};

/// Synthesizes every record's text in both typeface variants and checks the
/// predicted global pitch order.
EmotionReport eval_emotion(const acoustic::Model& model,
                           const std::vector<data::UtteranceRecord>& records, int variant_low,
                           int variant_high);

// ---- OOV / intelligibility ----

struct SplitScore {
  long long edits = 0;
  long long ref_len = 0;
  int sentences = 0;
  double cer() const { return ref_len ? static_cast<double>(edits) / ref_len : 0.0; }
};

struct OovReport {
  SplitScore visual[3];    // indexed by SplitLabel order: in_vocab, rare, oov
  SplitScore baseline[3];
  double visual_oov_feature_distance = 0.0;
  double baseline_oov_embed_distance = 0.0;
};

/// Per split: synthesize with each front-end, decode the predicted mel by
/// duration-aligned template argmax, pool CER. Also reports the feature /
/// embedding distance between two distinct OOV characters.
OovReport eval_oov(const acoustic::Model& visual_model, const acoustic::Model& baseline_model,
                   const data::CorpusStats& train_stats,
                   const std::vector<data::UtteranceRecord>& test_records,
                   const data::TemplateUniverse& universe,
                   std::pair<uint32_t, uint32_t> oov_pair);

// ---- compositionality ----

struct CompositionalityReport {
  double mean_same_component = 0.0;
  double mean_disjoint = 0.0;
  int probes = 0;
};

/// Mean L2 distance from each probe glyph's feature to features of seen
/// glyphs sharing a component versus sharing none.
CompositionalityReport compositionality_probe(const acoustic::Model& visual_model,
                                              const std::vector<uint32_t>& seen_chars,
                                              const std::vector<uint32_t>& probe_chars);

// ---- protocol corpus builders ----

struct ProtocolPaths {
  std::string train_manifest;
  std::string heldout_manifest;
};

/// Plain-alphabet corpus with underline-emphasized spans mapped to pitch
/// +1.0 and +3 dB gain; separate held-out texts for evaluation.
ProtocolPaths build_emphasis_protocol(uint64_t seed, const std::string& out_dir,
                                      int train_size, int holdout_size);

/// Two synthetic typeface variants mapped to -shift/+shift global log-F0.
ProtocolPaths build_emotion_protocol(uint64_t seed, const std::string& out_dir,
                                     int train_size, int holdout_size, double shift);

struct OovProtocol {
  std::string train_manifest;
  std::string test_manifest;  // in-vocab, rare and OOV sentences mixed
  data::TemplateUniverse universe;
  std::vector<uint32_t> common_chars;
  std::vector<uint32_t> rare_chars;
  std::vector<uint32_t> oov_chars;  // unseen component pairs
  std::pair<uint32_t, uint32_t> oov_pair;
};

/// Composed-alphabet corpus: characters are component stacks; training
/// covers a subset of component pairs with controlled frequencies (common
/// >= 3, rare 1..2, OOV 0); test sentences exercise all three splits.
OovProtocol build_oov_protocol(uint64_t seed, const std::string& out_dir, int train_size,
                               int test_per_split);

}  // namespace vtts::eval
