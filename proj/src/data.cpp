// SPDX-License-Identifier: Apache-2.0
#include "vtts/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "vtts/tensor_io.hpp"

namespace fs = std::filesystem;

namespace vtts::data {

long long CorpusStats::count_of(uint32_t cp) const {
  auto it = counts.find(cp);
  return it == counts.end() ? 0 : it->second;
}

CorpusStats CorpusStats::from_texts(const std::vector<std::string>& texts) {
  CorpusStats s;
  for (const auto& t : texts)
    for (uint32_t cp : utf8_decode(t)) ++s.counts[cp];
  return s;
}

CorpusStats CorpusStats::from_records(const std::vector<UtteranceRecord>& records) {
  std::vector<std::string> texts;
  texts.reserve(records.size());
  for (const auto& r : records) texts.push_back(r.text);
  return from_texts(texts);
}

std::string to_string(SplitLabel label) {
  switch (label) {
    case SplitLabel::InVocab: return "in_vocab";
    case SplitLabel::Rare: return "rare";
    case SplitLabel::Oov: return "oov";
  }
  return "?";
}

SplitLabel classify_sentence(const std::string& text, const CorpusStats& stats,
                             long long threshold) {
  bool any_rare = false;
  for (uint32_t cp : utf8_decode(text)) {
    long long c = stats.count_of(cp);
    if (c == 0) return SplitLabel::Oov;
    if (c < threshold) any_rare = true;
  }
  return any_rare ? SplitLabel::Rare : SplitLabel::InVocab;
}

size_t edit_distance(const std::vector<uint32_t>& a, const std::vector<uint32_t>& b) {
  const size_t n = a.size();
  const size_t m = b.size();
  std::vector<size_t> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = j;
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= m; ++j) {
      size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double cer(const std::string& reference, const std::string& hypothesis) {
  auto ref = utf8_decode(reference);
  if (ref.empty()) throw InputError("cer: reference must be non-empty");
  auto hyp = utf8_decode(hypothesis);
  return static_cast<double>(edit_distance(ref, hyp)) / static_cast<double>(ref.size());
}

// ------------------------------------------------------------- manifest io

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::string decorations_to_field(const std::vector<textimg::Decoration>& decos) {
  if (decos.empty()) return "-";
  std::string out;
  for (size_t i = 0; i < decos.size(); ++i) {
    if (i) out += ";";
    out += textimg::to_string(decos[i].kind) + ":" + std::to_string(decos[i].start) + ":" +
           std::to_string(decos[i].end);
  }
  return out;
}

std::vector<textimg::Decoration> decorations_from_field(const std::string& field) {
  std::vector<textimg::Decoration> out;
  if (field.empty() || field == "-") return out;
  for (const auto& part : split(field, ';')) {
    auto bits = split(part, ':');
    if (bits.size() != 3) throw InputError("malformed decoration: " + part);
    textimg::Decoration d;
    d.kind = textimg::decoration_kind_from_string(bits[0]);
    d.start = std::stoi(bits[1]);
    d.end = std::stoi(bits[2]);
    out.push_back(d);
  }
  return out;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& field, Parse parse) {
  std::vector<T> out;
  if (field.empty()) return out;
  for (const auto& part : split(field, ',')) out.push_back(parse(part));
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(17);
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) os << ",";
    os << v[i];
  }
  return os.str();
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

std::vector<UtteranceRecord> load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest: " + path);
  fs::path dir = fs::path(path).parent_path();
  std::vector<UtteranceRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 8)
      throw InputError("manifest line " + std::to_string(line_no) + ": expected 8 fields, got " +
                       std::to_string(fields.size()));
    UtteranceRecord r;
    r.utterance_id = fields[0];
    auto fail = [&](const std::string& why) {
      throw InputError("manifest record " + r.utterance_id + ": " + why);
    };
    r.text = fields[1];
    size_t n = utf8_decode(r.text).size();
    try {
      r.decorations = decorations_from_field(fields[2]);
      r.typeface_variant = std::stoi(fields[3]);
      r.mel_path = fields[4];
      r.durations = parse_list<int>(fields[5], [](const std::string& s) { return std::stoi(s); });
      r.pitch = parse_list<double>(fields[6], [](const std::string& s) { return std::stod(s); });
      r.energy = parse_list<double>(fields[7], [](const std::string& s) { return std::stod(s); });
    } catch (const InputError&) {
      throw;
    } catch (const std::exception& e) {
      fail(std::string("malformed field (") + e.what() + ")");
    }
    if (r.durations.size() != n)
      fail("durations length " + std::to_string(r.durations.size()) +
           " does not match text length " + std::to_string(n));
    if (r.pitch.size() != n) fail("pitch length does not match text length");
    if (r.energy.size() != n) fail("energy length does not match text length");
    for (int d : r.durations)
      if (d < 0) fail("negative duration");
    try {
      textimg::validate_decorations(r.decorations, static_cast<int>(n));
    } catch (const InputError& e) {
      fail(e.what());
    }
    fs::path mel = fs::path(r.mel_path);
    if (mel.is_relative()) mel = dir / mel;
    std::vector<uint32_t> dims;
    try {
      dims = io::read_tensor_dims(mel.string());
    } catch (const IoError& e) {
      fail(std::string("mel file: ") + e.what());
    }
    if (dims.size() != 2) fail("mel tensor is not 2-D");
    long long total = 0;
    for (int d : r.durations) total += d;
    if (total != static_cast<long long>(dims[0]))
      fail("durations sum to " + std::to_string(total) + " but mel has " +
           std::to_string(dims[0]) + " frames");
    r.mel_path = mel.string();
    out.push_back(std::move(r));
  }
  return out;
}

void save_manifest(const std::string& path, const std::vector<UtteranceRecord>& records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open manifest for writing: " + path);
  for (const auto& r : records) {
    os << r.utterance_id << '\t' << r.text << '\t' << decorations_to_field(r.decorations)
       << '\t' << r.typeface_variant << '\t' << r.mel_path << '\t' << join_ints(r.durations)
       << '\t' << join_doubles(r.pitch) << '\t' << join_doubles(r.energy) << '\n';
  }
  if (!os) throw IoError("manifest write failed: " + path);
}

// ----------------------------------------------------------------- corpus

namespace {

double hash_unit(uint32_t cp, uint64_t salt) {
  uint64_t x = splitmix64(salt ^ (static_cast<uint64_t>(cp) * 0x9E3779B97F4A7C15ULL));
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

long long positive_mod(long long x, long long m) { return ((x % m) + m) % m; }

}  // namespace

int plain_template_bin(uint32_t cp, int n_mels) {
  int span = n_mels - 2 * kTemplateBinMargin;
  if (span <= 0) throw ConfigError("n_mels too small for templates");
  long long x = (static_cast<long long>(cp) - 65) * 5;
  return kTemplateBinMargin + static_cast<int>(positive_mod(x, span));
}

std::pair<int, int> composed_template_bins(uint32_t cp, int n_mels) {
  if (!textimg::is_composed_codepoint(cp))
    throw InputError("composed_template_bins: not a composed codepoint");
  int half = n_mels / 2;
  int p = textimg::composed_top(cp);
  int q = textimg::composed_bottom(cp);
  int top = kTemplateBinMargin + positive_mod(p * 5, half - 2 * kTemplateBinMargin);
  int bottom =
      half + kTemplateBinMargin + positive_mod(q * 5, half - 2 * kTemplateBinMargin);
  return {top, bottom};
}

namespace {

void add_band(std::vector<double>& frame, int center, double gain) {
  for (int d = -3; d <= 3; ++d) {
    int m = center + d;
    if (m < 0 || m >= static_cast<int>(frame.size())) continue;
    frame[m] += gain * std::exp(-0.5 * d * d);
  }
}

}  // namespace

std::vector<double> char_mel_template(uint32_t cp, AlphabetStyle style, int n_mels,
                                      double gain) {
  std::vector<double> frame(n_mels, 0.0);
  if (style == AlphabetStyle::Composed && textimg::is_composed_codepoint(cp)) {
    auto [top, bottom] = composed_template_bins(cp, n_mels);
    add_band(frame, top, gain);
    add_band(frame, bottom, gain);
  } else {
    add_band(frame, plain_template_bin(cp, n_mels), gain);
  }
  return frame;
}

double base_pitch(uint32_t cp) { return 4.75 + 0.5 * hash_unit(cp, 0x7069); }
double base_energy(uint32_t cp) { return 1.0 + 0.2 * hash_unit(cp, 0x656e); }

namespace {

void validate_synth_spec(const SynthSpec& spec) {
  if (spec.alphabet.empty()) throw ConfigError("synthetic corpus: alphabet is empty");
  for (uint32_t cp : spec.alphabet)
    if (cp == 32)
      throw ConfigError("synthetic corpus: the reserved space codepoint is not allowed");
  if (spec.size <= 0) throw ConfigError("synthetic corpus: size must be positive");
  if (spec.min_len < 1 || spec.max_len < spec.min_len)
    throw ConfigError("synthetic corpus: bad length range");
  if (spec.style == AlphabetStyle::Composed) {
    // glyph identity self-check: all characters and their component halves
    // must be visually distinct, otherwise decoding is ill-posed
    std::set<std::array<uint8_t, 35>> glyphs;
    std::set<std::vector<uint8_t>> tops, bottoms;
    for (uint32_t cp : spec.alphabet) {
      if (!textimg::is_composed_codepoint(cp))
        throw ConfigError("composed corpus: alphabet must use composed codepoints");
      auto bm = textimg::synthetic_glyph_bitmap(cp, 0);
      glyphs.insert(bm.bits);
    }
    if (glyphs.size() != spec.alphabet.size())
      throw ConfigError("composed corpus: glyph collision in alphabet");
    std::set<int> ps, qs;
    for (uint32_t cp : spec.alphabet) {
      ps.insert(textimg::composed_top(cp));
      qs.insert(textimg::composed_bottom(cp));
    }
    for (int p : ps) {
      auto bm = textimg::synthetic_glyph_bitmap(textimg::kTopComponentBase + p, 0);
      tops.insert(std::vector<uint8_t>(bm.bits.begin(), bm.bits.begin() + 15));
    }
    for (int q : qs) {
      auto bm = textimg::synthetic_glyph_bitmap(textimg::kBottomComponentBase + q, 0);
      bottoms.insert(std::vector<uint8_t>(bm.bits.begin() + 15, bm.bits.end()));
    }
    if (tops.size() != ps.size() || bottoms.size() != qs.size())
      throw ConfigError("composed corpus: component half collision");
  }
}

}  // namespace

std::vector<UtteranceRecord> materialize_corpus(const SynthSpec& spec,
                                                const std::vector<std::vector<uint32_t>>& texts,
                                                const std::string& out_dir) {
  validate_synth_spec(spec);
  fs::create_directories(fs::path(out_dir) / "mel");
  Rng rng(splitmix64(spec.seed ^ 0x636F7270ULL));

  std::vector<int> variants;
  for (const auto& [v, prosody] : spec.variant_map) variants.push_back(v);

  std::vector<UtteranceRecord> records;
  for (size_t u = 0; u < texts.size(); ++u) {
    UtteranceRecord r;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "%s%05d", spec.id_prefix.c_str(),
                  static_cast<int>(u));
    r.utterance_id = idbuf;
    const std::vector<uint32_t>& cps = texts[u];
    const int len = static_cast<int>(cps.size());
    r.text = utf8_encode(cps);

    VariantProsody prosody;
    if (!variants.empty()) {
      r.typeface_variant = variants[rng.uniform_int(0, static_cast<int>(variants.size()) - 1)];
      prosody = spec.variant_map.at(r.typeface_variant);
    }

    // an emphasized span always leaves at least one plain character so
    // span-vs-remainder contrasts stay well defined
    std::vector<bool> emphasized(len, false);
    if (spec.emphasis == EmphasisMode::PitchShift && len >= 3) {
      int span = rng.uniform_int(2, std::min(3, len - 1));
      int start = rng.uniform_int(0, len - span);
      textimg::Decoration d;
      d.kind = textimg::DecorationKind::Underline;
      d.start = start;
      d.end = start + span;
      r.decorations.push_back(d);
      for (int i = start; i < start + span; ++i) emphasized[i] = true;
    }

    int dur = std::max(1, static_cast<int>(std::lround(spec.frames_per_char *
                                                       prosody.tempo_scale)));
    std::vector<std::vector<double>> mel_rows;
    for (int i = 0; i < len; ++i) {
      double gain = emphasized[i] ? kEmphasisGain : 1.0;
      r.durations.push_back(dur);
      r.pitch.push_back(base_pitch(cps[i]) + (emphasized[i] ? kEmphasisPitchShift : 0.0) +
                        prosody.pitch_shift);
      r.energy.push_back(base_energy(cps[i]) * gain);
      auto frame = char_mel_template(cps[i], spec.style, spec.n_mels, gain);
      for (int f = 0; f < dur; ++f) mel_rows.push_back(frame);
    }
    Mat mel(static_cast<int>(mel_rows.size()), spec.n_mels);
    for (size_t row = 0; row < mel_rows.size(); ++row)
      for (int m = 0; m < spec.n_mels; ++m) mel.at(static_cast<int>(row), m) = mel_rows[row][m];
    std::string rel = "mel/" + r.utterance_id + ".vt";
    io::write_tensor((fs::path(out_dir) / rel).string(), mel);
    r.mel_path = rel;
    records.push_back(std::move(r));
  }
  save_manifest((fs::path(out_dir) / "manifest.tsv").string(), records);
  return records;
}

std::vector<UtteranceRecord> make_synthetic_corpus(const SynthSpec& spec,
                                                   const std::string& out_dir) {
  validate_synth_spec(spec);
  Rng rng(splitmix64(spec.seed ^ 0x74657874ULL));
  std::vector<std::vector<uint32_t>> texts;
  for (int u = 0; u < spec.size; ++u) {
    int len = rng.uniform_int(spec.min_len, spec.max_len);
    std::vector<uint32_t> cps;
    for (int i = 0; i < len; ++i)
      cps.push_back(
          spec.alphabet[rng.uniform_int(0, static_cast<int>(spec.alphabet.size()) - 1)]);
    texts.push_back(std::move(cps));
  }
  return materialize_corpus(spec, texts, out_dir);
}

std::string decode_mel_by_template(const Mat& mel, const std::vector<int>& durations,
                                   const TemplateUniverse& universe) {
  if (universe.chars.empty()) throw InputError("decode: empty template universe");
  std::vector<uint32_t> decoded;
  int frame = 0;
  for (int dur : durations) {
    if (dur <= 0) continue;
    int hi = std::min(frame + dur, mel.rows);
    if (frame >= hi) break;
    std::vector<double> profile(mel.cols, 0.0);
    for (int f = frame; f < hi; ++f)
      for (int m = 0; m < mel.cols; ++m) profile[m] += mel.at(f, m);
    frame = hi;
    if (universe.style == AlphabetStyle::Composed) {
      int half = universe.n_mels / 2;
      int arg_lo = 0, arg_hi = half;
      for (int m = 1; m < half; ++m)
        if (profile[m] > profile[arg_lo]) arg_lo = m;
      for (int m = half + 1; m < mel.cols; ++m)
        if (profile[m] > profile[arg_hi]) arg_hi = m;
      uint32_t best = universe.chars[0];
      long long best_cost = -1;
      for (uint32_t cp : universe.chars) {
        auto [top, bottom] = composed_template_bins(cp, universe.n_mels);
        long long cost = std::llabs(top - arg_lo) + std::llabs(bottom - arg_hi);
        if (best_cost < 0 || cost < best_cost || (cost == best_cost && cp < best)) {
          best_cost = cost;
          best = cp;
        }
      }
      decoded.push_back(best);
    } else {
      int arg = 0;
      for (int m = 1; m < mel.cols; ++m)
        if (profile[m] > profile[arg]) arg = m;
      uint32_t best = universe.chars[0];
      long long best_cost = -1;
      for (uint32_t cp : universe.chars) {
        long long cost = std::llabs(plain_template_bin(cp, universe.n_mels) - arg);
        if (best_cost < 0 || cost < best_cost || (cost == best_cost && cp < best)) {
          best_cost = cost;
          best = cp;
        }
      }
      decoded.push_back(best);
    }
  }
  return utf8_encode(decoded);
}

}  // namespace vtts::data
