// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "vtts/data.hpp"
#include "vtts/tensor_io.hpp"

using namespace vtts;
using namespace vtts::data;

namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

// independent DP oracle, memo over the full table
size_t oracle_edit(const std::vector<uint32_t>& a, const std::vector<uint32_t>& b) {
  std::vector<std::vector<size_t>> d(a.size() + 1, std::vector<size_t>(b.size() + 1));
  for (size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (size_t i = 1; i <= a.size(); ++i)
    for (size_t j = 1; j <= b.size(); ++j) {
      size_t best = d[i - 1][j] + 1;
      best = std::min(best, d[i][j - 1] + 1);
      best = std::min(best, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u));
      d[i][j] = best;
    }
  return d[a.size()][b.size()];
}

std::vector<uint32_t> rand_word(Rng& rng, int max_len) {
  int n = rng.uniform_int(0, max_len);
  std::vector<uint32_t> w;
  for (int i = 0; i < n; ++i) w.push_back('a' + rng.uniform_int(0, 3));
  return w;
}

}  // namespace

TEST_CASE("cer on known small cases") {
  CHECK(cer("abc", "abc") == 0.0);
  CHECK(cer("abc", "abd") == doctest::Approx(1.0 / 3.0));
  CHECK(cer("ab", "axb") == doctest::Approx(0.5));
  CHECK_THROWS_AS(cer("", "abc"), InputError);
}

TEST_CASE("edit distance matches a DP oracle and is a metric on random strings") {
  Rng rng(42);
  for (int iter = 0; iter < 200; ++iter) {
    auto a = rand_word(rng, 8);
    auto b = rand_word(rng, 8);
    auto c = rand_word(rng, 8);
    size_t dab = edit_distance(a, b);
    CHECK(dab == oracle_edit(a, b));
    CHECK(edit_distance(a, a) == 0);
    CHECK(dab == edit_distance(b, a));
    CHECK(dab <= edit_distance(a, c) + edit_distance(c, b));
  }
}

TEST_CASE("classification follows the oov > rare > in_vocab precedence") {
  CorpusStats stats;
  stats.counts['a'] = 5;
  stats.counts['b'] = 3;
  stats.counts['c'] = 2;
  CHECK(classify_sentence("ab", stats) == SplitLabel::InVocab);   // all >= 3
  CHECK(classify_sentence("abc", stats) == SplitLabel::Rare);     // c has 2
  CHECK(classify_sentence("abcz", stats) == SplitLabel::Oov);     // z unseen wins
  CHECK(classify_sentence("z", stats) == SplitLabel::Oov);
}

TEST_CASE("classification is monotone in training counts") {
  Rng rng(7);
  for (int iter = 0; iter < 50; ++iter) {
    CorpusStats lo, hi;
    for (uint32_t cp = 'a'; cp <= 'f'; ++cp) {
      long long n = rng.uniform_int(0, 5);
      lo.counts[cp] = n;
      hi.counts[cp] = n + rng.uniform_int(0, 5);
    }
    std::string text;
    int len = rng.uniform_int(1, 6);
    for (int i = 0; i < len; ++i) text.push_back('a' + rng.uniform_int(0, 5));
    // adding occurrences never moves a sentence toward oov
    int a = static_cast<int>(classify_sentence(text, lo));
    int b = static_cast<int>(classify_sentence(text, hi));
    CHECK(b <= a);  // InVocab=0 < Rare=1 < Oov=2
  }
}

TEST_CASE("synthetic corpus is byte-identical across runs with one seed") {
  SynthSpec spec;
  spec.seed = 7;
  spec.size = 8;
  spec.alphabet = {'a', 'b', 'c', 'd'};
  spec.emphasis = EmphasisMode::PitchShift;
  std::string d1 = fresh_dir("vtts_corpus_a");
  std::string d2 = fresh_dir("vtts_corpus_b");
  auto r1 = make_synthetic_corpus(spec, d1);
  auto r2 = make_synthetic_corpus(spec, d2);
  REQUIRE(r1.size() == r2.size());
  auto bytes = [](const std::string& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
  };
  CHECK(bytes(d1 + "/manifest.tsv") == bytes(d2 + "/manifest.tsv"));
  for (const auto& r : r1)
    CHECK(bytes(d1 + "/" + r.mel_path) == bytes(d2 + "/" + r.mel_path));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("template rule: 'e' maps to bin 40 and its mel frames argmax there") {
  CHECK(plain_template_bin('e', 80) == 40);
  SynthSpec spec;
  spec.seed = 3;
  spec.size = 6;
  spec.alphabet = {'e', 'f', 'g'};
  std::string dir = fresh_dir("vtts_corpus_bin");
  auto records = make_synthetic_corpus(spec, dir);
  bool saw_e = false;
  for (const auto& r : records) {
    auto cps = utf8_decode(r.text);
    Mat mel = io::read_tensor_mat(dir + "/" + r.mel_path);
    int frame = 0;
    for (size_t i = 0; i < cps.size(); ++i) {
      for (int f = 0; f < r.durations[i]; ++f, ++frame) {
        if (cps[i] != 'e') continue;
        saw_e = true;
        int arg = 0;
        for (int m2 = 1; m2 < mel.cols; ++m2)
          if (mel.at(frame, m2) > mel.at(frame, arg)) arg = m2;
        CHECK(arg == 40);
      }
    }
  }
  CHECK(saw_e);
  fs::remove_all(dir);
}

TEST_CASE("emphasis adds exactly +1.0 to pitch targets inside the span") {
  SynthSpec spec;
  spec.seed = 11;
  spec.size = 10;
  spec.alphabet = {'a', 'b', 'c', 'd', 'e'};
  spec.emphasis = EmphasisMode::PitchShift;
  std::string dir = fresh_dir("vtts_corpus_emp");
  auto records = make_synthetic_corpus(spec, dir);
  int spans_checked = 0;
  for (const auto& r : records) {
    if (r.decorations.empty()) continue;
    auto cps = utf8_decode(r.text);
    const auto& d = r.decorations[0];
    for (int i = 0; i < static_cast<int>(cps.size()); ++i) {
      double base = base_pitch(cps[i]);
      if (i >= d.start && i < d.end)
        CHECK(r.pitch[i] == doctest::Approx(base + 1.0));
      else
        CHECK(r.pitch[i] == doctest::Approx(base));
    }
    ++spans_checked;
  }
  CHECK(spans_checked > 0);
  fs::remove_all(dir);
}

TEST_CASE("the space codepoint is rejected in alphabets") {
  SynthSpec spec;
  spec.alphabet = {'a', ' '};
  CHECK_THROWS_AS(make_synthetic_corpus(spec, fresh_dir("vtts_corpus_sp")), ConfigError);
}

TEST_CASE("generated corpora pass manifest validation round-trip") {
  SynthSpec spec;
  spec.seed = 5;
  spec.size = 6;
  spec.alphabet = {'a', 'b', 'c'};
  spec.emphasis = EmphasisMode::PitchShift;
  spec.variant_map[0] = {-0.5, 1.0};
  spec.variant_map[1] = {0.5, 1.25};
  std::string dir = fresh_dir("vtts_corpus_rt");
  auto written = make_synthetic_corpus(spec, dir);
  auto loaded = load_manifest(dir + "/manifest.tsv");
  REQUIRE(loaded.size() == written.size());
  for (size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].utterance_id == written[i].utterance_id);
    CHECK(loaded[i].text == written[i].text);
    CHECK(loaded[i].durations == written[i].durations);
    CHECK(loaded[i].typeface_variant == written[i].typeface_variant);
    CHECK(loaded[i].pitch.size() == written[i].pitch.size());
    for (size_t j = 0; j < loaded[i].pitch.size(); ++j)
      CHECK(loaded[i].pitch[j] == written[i].pitch[j]);  // full-precision round trip
  }
  fs::remove_all(dir);
}

TEST_CASE("manifest validation failures name the record") {
  std::string dir = fresh_dir("vtts_manifest_bad");
  io::write_tensor(dir + "/good.vt", Mat(8, 4, 0.5));
  {
    std::ofstream os(dir + "/manifest.tsv");
    os << "utt_ok\tab\t-\t0\tgood.vt\t4,4\t1.0,1.0\t1.0,1.0\n";
  }
  CHECK(load_manifest(dir + "/manifest.tsv").size() == 1);
  {
    std::ofstream os(dir + "/manifest.tsv");
    os << "utt_badlen\tab\t-\t0\tgood.vt\t4,4,4\t1.0,1.0\t1.0,1.0\n";
  }
  CHECK_THROWS_WITH_AS(load_manifest(dir + "/manifest.tsv"),
                       doctest::Contains("utt_badlen"), InputError);
  {
    std::ofstream os(dir + "/manifest.tsv");
    os << "utt_badsum\tab\t-\t0\tgood.vt\t4,5\t1.0,1.0\t1.0,1.0\n";
  }
  CHECK_THROWS_WITH_AS(load_manifest(dir + "/manifest.tsv"),
                       doctest::Contains("utt_badsum"), InputError);
  {
    std::ofstream os(dir + "/manifest.tsv");
    os << "utt_nomel\tab\t-\t0\tmissing.vt\t4,4\t1.0,1.0\t1.0,1.0\n";
  }
  CHECK_THROWS_WITH_AS(load_manifest(dir + "/manifest.tsv"),
                       doctest::Contains("utt_nomel"), InputError);
  // empty manifest is valid
  {
    std::ofstream os(dir + "/manifest.tsv");
  }
  CHECK(load_manifest(dir + "/manifest.tsv").empty());
  fs::remove_all(dir);
}

TEST_CASE("template argmax decoding recovers the text of clean templates") {
  SynthSpec spec;
  spec.seed = 13;
  spec.size = 6;
  spec.alphabet = {'a', 'b', 'c', 'd', 'e', 'f'};
  std::string dir = fresh_dir("vtts_corpus_dec");
  auto records = make_synthetic_corpus(spec, dir);
  TemplateUniverse universe;
  universe.style = AlphabetStyle::Plain;
  universe.n_mels = 80;
  universe.chars = spec.alphabet;
  for (const auto& r : records) {
    Mat mel = io::read_tensor_mat(dir + "/" + r.mel_path);
    CHECK(decode_mel_by_template(mel, r.durations, universe) == r.text);
  }
  fs::remove_all(dir);
}

TEST_CASE("composed templates put one band in each half and decode exactly") {
  std::vector<uint32_t> alphabet;
  for (int p = 0; p < 4; ++p)
    for (int q = 0; q < 4; ++q) alphabet.push_back(textimg::composed_codepoint(p, q));
  SynthSpec spec;
  spec.seed = 17;
  spec.size = 6;
  spec.style = AlphabetStyle::Composed;
  spec.alphabet = alphabet;
  std::string dir = fresh_dir("vtts_corpus_comp");
  auto records = make_synthetic_corpus(spec, dir);
  TemplateUniverse universe;
  universe.style = AlphabetStyle::Composed;
  universe.n_mels = 80;
  universe.chars = alphabet;
  for (const auto& r : records) {
    Mat mel = io::read_tensor_mat(dir + "/" + r.mel_path);
    CHECK(decode_mel_by_template(mel, r.durations, universe) == r.text);
  }
  auto [top, bottom] = composed_template_bins(textimg::composed_codepoint(2, 3), 80);
  CHECK(top == 4 + 2 * 5);
  CHECK(bottom == 40 + 4 + 3 * 5);
  fs::remove_all(dir);
}
