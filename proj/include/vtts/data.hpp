// SPDX-License-Identifier: Apache-2.0
//
// Corpus handling: manifest ingestion with validation, character frequency
// statistics, the in-vocab/rare/OOV split rule, character error rate, and a
// deterministic synthetic corpus generator whose per-character mel templates
// make intelligibility machine-checkable by argmax decoding.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "vtts/common.hpp"
#include "vtts/textimg.hpp"

namespace vtts::data {

struct UtteranceRecord {
  std::string utterance_id;
  std::string text;  // UTF-8
  std::vector<textimg::Decoration> decorations;
  int typeface_variant = 0;
  std::string mel_path;  // as written in the manifest (may be relative)
  std::vector<int> durations;
  std::vector<double> pitch;
  std::vector<double> energy;
};

struct CorpusStats {
  std::map<uint32_t, long long> counts;

  long long count_of(uint32_t cp) const;
  static CorpusStats from_texts(const std::vector<std::string>& texts);
  static CorpusStats from_records(const std::vector<UtteranceRecord>& records);
};

enum class SplitLabel { InVocab, Rare, Oov };
std::string to_string(SplitLabel label);

/// Manifest: one record per line, 8 tab-separated fields:
///   utterance_id, text, decorations ("-" or kind:start:end;...),
///   typeface_variant, mel_path, durations (comma ints), pitch, energy
///   (comma decimals). UTF-8 throughout.
/// Every record is validated (field shapes, decoration spans, and
/// sum(durations) against the mel file's frame count); a bad record aborts
/// the load with its utterance_id in the message. Relative mel paths are
/// resolved against the manifest's directory in the returned records.
std::vector<UtteranceRecord> load_manifest(const std::string& path);
void save_manifest(const std::string& path, const std::vector<UtteranceRecord>& records);

/// oov if any character is unseen, else rare if any character's count is
/// below the threshold, else in_vocab. Count == threshold is in_vocab.
SplitLabel classify_sentence(const std::string& text, const CorpusStats& stats,
                             long long threshold = 3);

/// Unit-cost Levenshtein distance on codepoints.
size_t edit_distance(const std::vector<uint32_t>& a, const std::vector<uint32_t>& b);

/// edit_distance / len(reference); the reference must be non-empty.
double cer(const std::string& reference, const std::string& hypothesis);

// ------------------------------------------------------------------ corpus

enum class AlphabetStyle { Plain, Composed };
enum class EmphasisMode { Off, PitchShift };

struct VariantProsody {
  double pitch_shift = 0.0;
  double tempo_scale = 1.0;
};

struct SynthSpec {
  uint64_t seed = 0;
  int size = 20;
  AlphabetStyle style = AlphabetStyle::Plain;
  std::vector<uint32_t> alphabet;  // non-empty; the space codepoint is rejected
  EmphasisMode emphasis = EmphasisMode::Off;
  std::map<int, VariantProsody> variant_map;  // empty: variant 0, neutral prosody
  int min_len = 4;
  int max_len = 7;
  int n_mels = 80;
  int frames_per_char = 4;
  std::string id_prefix = "utt";
};

// Template rules (deterministic, reproducible from this comment):
//   plain:    one band at bin = 4 + ((cp - 65) * 5 mod (n_mels - 8))
//   composed: two bands, bin_top = 4 + p*5 in the lower half and
//             bin_bottom = n_mels/2 + 4 + q*5 in the upper half, where
//             (p, q) are the codepoint's components.
// A band is a Gaussian bump exp(-d^2/2) truncated at |d| <= 3, scaled by the
// character's gain. Base prosody per character:
//   pitch  = 4.75 + 0.5 * u(cp, 0x7069)     (log-F0 domain)
//   energy = 1.0 + 0.2 * u(cp, 0x656e)
// with u(cp, salt) = splitmix64(salt ^ cp * 0x9E3779B97F4A7C15) / 2^64 via
// the top 53 bits. Emphasized characters get pitch +1.0 and gain * 10^(3/20).
int plain_template_bin(uint32_t cp, int n_mels);
std::pair<int, int> composed_template_bins(uint32_t cp, int n_mels);
std::vector<double> char_mel_template(uint32_t cp, AlphabetStyle style, int n_mels,
                                      double gain);
double base_pitch(uint32_t cp);
double base_energy(uint32_t cp);

constexpr double kEmphasisPitchShift = 1.0;
constexpr double kEmphasisGain = 1.4125375446227544;  // +3 dB
constexpr int kTemplateBinMargin = 4;

/// Writes out_dir/manifest.tsv and out_dir/mel/<id>.vt; returns the records
/// with mel paths exactly as written (relative). Deterministic given the
/// spec: two runs produce byte-identical trees.
std::vector<UtteranceRecord> make_synthetic_corpus(const SynthSpec& spec,
                                                   const std::string& out_dir);

/// Same materialization (durations, prosody, decorations, mel files,
/// manifest) over caller-supplied texts instead of sampled ones. Protocol
/// builders use this to control character frequencies exactly.
std::vector<UtteranceRecord> materialize_corpus(const SynthSpec& spec,
                                                const std::vector<std::vector<uint32_t>>& texts,
                                                const std::string& out_dir);

/// Independent decode universe entry: a character and its template band(s).
struct TemplateUniverse {
  AlphabetStyle style = AlphabetStyle::Plain;
  int n_mels = 80;
  std::vector<uint32_t> chars;
};

/// Decodes a predicted mel by duration-aligned segments: each segment's
/// average frame is matched to the nearest template in the universe
/// (plain: nearest band; composed: nearest top band and nearest bottom
/// band). Zero-duration characters decode to nothing.
std::string decode_mel_by_template(const Mat& mel, const std::vector<int>& durations,
                                   const TemplateUniverse& universe);

}  // namespace vtts::data
