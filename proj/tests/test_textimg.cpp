// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <set>
#include <vector>

#include "vtts/textimg.hpp"

using namespace vtts;
using namespace vtts::textimg;

namespace {

RenderSpec spec30() {
  RenderSpec s;
  s.char_width_px = 30;
  s.char_height_px = 30;
  return s;
}

// Independent re-derivation of the documented synthetic font rule. Kept
// deliberately separate from the library implementation.
uint64_t oracle_mix(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::array<uint8_t, 35> oracle_attempt(uint32_t cp, int variant, int attempt) {
  std::array<uint8_t, 35> bits{};
  for (int cell = 0; cell < 35; ++cell) {
    uint64_t key = (static_cast<uint64_t>(cp) << 22) |
                   (static_cast<uint64_t>(variant & 0xFF) << 14) |
                   (static_cast<uint64_t>(attempt & 0xFF) << 6) |
                   static_cast<uint64_t>(cell);
    bits[cell] = static_cast<uint8_t>(oracle_mix(key) & 1);
  }
  return bits;
}

std::array<uint8_t, 35> oracle_bitmap(uint32_t cp, int variant) {
  if (cp == 32) return {};
  std::vector<std::array<uint8_t, 35>> accepted;
  for (int v = 0; v <= variant; ++v) {
    for (int attempt = 0;; ++attempt) {
      auto cand = oracle_attempt(cp, v, attempt);
      bool blank = true;
      for (auto b : cand)
        if (b) { blank = false; break; }
      if (blank) continue;
      bool collides = false;
      for (const auto& prev : accepted)
        if (cand == prev) { collides = true; break; }
      if (!collides) {
        accepted.push_back(cand);
        break;
      }
    }
  }
  return accepted.back();
}

int count_ink(const Mat& m) {
  int n = 0;
  for (double v : m.a)
    if (v == RenderSpec::kInk) ++n;
  return n;
}

}  // namespace

TEST_CASE("space renders as an all-background cell") {
  auto cell = render_glyph(' ', spec30());
  CHECK(cell.pixels.rows == 30);
  CHECK(cell.pixels.cols == 30);
  for (double v : cell.pixels.a) CHECK(v == 0.0);
  CHECK_FALSE(cell.used_fallback);
}

TEST_CASE("render_glyph is deterministic") {
  auto a = render_glyph('a', spec30());
  auto b = render_glyph('a', spec30());
  CHECK(bit_equal(a.pixels, b.pixels));
}

TEST_CASE("synthetic bitmap matches the independently derived hash rule") {
  for (uint32_t cp : {uint32_t('a'), uint32_t('A'), uint32_t('z'), 0xE821u, 0x3042u}) {
    for (int variant : {0, 1, 2}) {
      auto got = synthetic_glyph_bitmap(cp, variant);
      auto want = oracle_bitmap(cp, variant);
      for (int i = 0; i < 35; ++i) CHECK(got.bits[i] == want[i]);
    }
  }
}

TEST_CASE("composed block codepoints are stacks of their component bitmaps") {
  uint32_t cp = composed_codepoint(3, 5);
  CHECK(is_composed_codepoint(cp));
  CHECK(composed_top(cp) == 3);
  CHECK(composed_bottom(cp) == 5);
  auto got = synthetic_glyph_bitmap(cp, 0);
  auto top = oracle_bitmap(kTopComponentBase + 3, 0);
  auto bottom = oracle_bitmap(kBottomComponentBase + 5, 0);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 5; ++c) CHECK(got.at(r, c) == top[r * 5 + c]);
  for (int r = 3; r < 7; ++r)
    for (int c = 0; c < 5; ++c) CHECK(got.at(r, c) == bottom[r * 5 + c]);
}

TEST_CASE("rendered glyph ink mask equals the upscaled procedural bitmap") {
  auto spec = spec30();
  auto cell = render_glyph('a', spec);
  auto bm = oracle_bitmap('a', 0);
  for (int r = 0; r < 30; ++r)
    for (int c = 0; c < 30; ++c) {
      int sr = r * 7 / 30;
      int sc = c * 5 / 30;
      CHECK(cell.pixels.at(r, c) == (bm[sr * 5 + sc] ? 1.0 : 0.0));
    }
}

TEST_CASE("variants give distinct bitmaps for every test codepoint") {
  for (uint32_t cp = 'A'; cp <= 'Z'; ++cp) {
    std::set<std::array<uint8_t, 35>> seen;
    for (int v = 0; v < 3; ++v) seen.insert(synthetic_glyph_bitmap(cp, v).bits);
    CHECK(seen.size() == 3);
  }
  for (uint32_t cp = 'a'; cp <= 'z'; ++cp) {
    CHECK_FALSE(synthetic_glyph_bitmap(cp, 0) == synthetic_glyph_bitmap(cp, 1));
  }
}

TEST_CASE("space bitmap is reserved blank for any variant") {
  for (int v : {0, 1, 5}) {
    auto bm = synthetic_glyph_bitmap(32, v);
    for (auto b : bm.bits) CHECK(b == 0);
  }
}

TEST_CASE("render produces an n*w wide image") {
  auto img = render("abc", spec30());
  CHECK(img.char_count == 3);
  CHECK(img.pixels.rows == 30);
  CHECK(img.pixels.cols == 90);
}

TEST_CASE("empty text renders to a width-0 image") {
  auto img = render("", spec30());
  CHECK(img.char_count == 0);
  CHECK(img.pixels.rows == 30);
  CHECK(img.pixels.cols == 0);
}

TEST_CASE("underline changes only the decorated span's columns") {
  auto plain = render("ab", spec30());
  auto deco = render("ab", spec30(), {{DecorationKind::Underline, 0, 1}});
  bool changed_inside = false;
  for (int r = 0; r < 30; ++r)
    for (int c = 0; c < 60; ++c) {
      if (c >= 30) {
        CHECK(deco.pixels.at(r, c) == plain.pixels.at(r, c));
      } else if (deco.pixels.at(r, c) != plain.pixels.at(r, c)) {
        changed_inside = true;
      }
    }
  CHECK(changed_inside);
}

TEST_CASE("underline on an all-background cell inks exactly 2 rows") {
  Mat cell(30, 30, 0.0);
  Mat out = apply_decoration(cell, DecorationKind::Underline, spec30());
  CHECK(count_ink(out) == 60);
  for (int c = 0; c < 30; ++c) {
    CHECK(out.at(28, c) == 1.0);
    CHECK(out.at(29, c) == 1.0);
  }
}

TEST_CASE("bold of an empty mask is a fixpoint") {
  Mat cell(30, 30, 0.0);
  Mat out = apply_decoration(cell, DecorationKind::Bold, spec30());
  CHECK(bit_equal(out, cell));
}

TEST_CASE("bold of a single center pixel is a 5-pixel cross") {
  Mat cell(30, 30, 0.0);
  cell.at(15, 15) = 1.0;
  Mat out = apply_decoration(cell, DecorationKind::Bold, spec30());
  CHECK(count_ink(out) == 5);
  CHECK(out.at(15, 15) == 1.0);
  CHECK(out.at(14, 15) == 1.0);
  CHECK(out.at(16, 15) == 1.0);
  CHECK(out.at(15, 14) == 1.0);
  CHECK(out.at(15, 16) == 1.0);
}

TEST_CASE("italic shears linearly and clips to the run") {
  Mat cell(30, 30, 0.0);
  for (int r = 0; r < 30; ++r) cell.at(r, 0) = 1.0;  // left edge stripe
  Mat out = apply_decoration(cell, DecorationKind::Italic, spec30());
  // bottom row unshifted, top row shifted by round(0.2*30)=6
  CHECK(out.at(29, 0) == 1.0);
  CHECK(out.at(0, 6) == 1.0);
  CHECK(out.at(0, 0) == 0.0);
  // nothing may leave the run
  CHECK(out.rows == 30);
  CHECK(out.cols == 30);
}

TEST_CASE("decoration validation") {
  CHECK_THROWS_AS(render("ab", spec30(), {{DecorationKind::Underline, 1, 1}}), InputError);
  CHECK_THROWS_AS(render("ab", spec30(), {{DecorationKind::Underline, 0, 3}}), InputError);
  CHECK_THROWS_AS(render("abc", spec30(),
                         {{DecorationKind::Underline, 0, 2}, {DecorationKind::Bold, 1, 3}}),
                  InputError);
}

TEST_CASE("property: determinism, width law, binary range, locality") {
  Rng rng(2024);
  auto spec = spec30();
  for (int iter = 0; iter < 50; ++iter) {
    int n = rng.uniform_int(0, 10);
    std::vector<uint32_t> cps;
    for (int i = 0; i < n; ++i) cps.push_back('a' + rng.uniform_int(0, 25));
    std::vector<Decoration> decos;
    if (n >= 2 && rng.uniform() < 0.7) {
      int a = rng.uniform_int(0, n - 2);
      int b = rng.uniform_int(a + 1, n);
      DecorationKind kinds[] = {DecorationKind::Underline, DecorationKind::Bold,
                                DecorationKind::Italic};
      decos.push_back({kinds[rng.uniform_int(0, 2)], a, b});
    }
    auto img1 = render(cps, spec, decos);
    auto img2 = render(cps, spec, decos);
    CHECK(bit_equal(img1.pixels, img2.pixels));
    CHECK(img1.pixels.cols == n * 30);
    for (double v : img1.pixels.a) CHECK((v == 0.0 || v == 1.0));
    if (!decos.empty()) {
      auto plain = render(cps, spec);
      int lo = decos[0].start * 30;
      int hi = decos[0].end * 30;
      for (int r = 0; r < 30; ++r)
        for (int c = 0; c < img1.pixels.cols; ++c)
          if (c < lo || c >= hi)
            CHECK(img1.pixels.at(r, c) == plain.pixels.at(r, c));
    }
  }
}

TEST_CASE("stacked bitmaps take top 3 rows and bottom 4 rows") {
  auto a = synthetic_glyph_bitmap('a', 0);
  auto b = synthetic_glyph_bitmap('b', 0);
  auto s = stack_bitmaps(a, b);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 5; ++c) CHECK(s.at(r, c) == a.at(r, c));
  for (int r = 3; r < 7; ++r)
    for (int c = 0; c < 5; ++c) CHECK(s.at(r, c) == b.at(r, c));
}

TEST_CASE("file fonts are rejected while no rasterizer is compiled in") {
  RenderSpec s = spec30();
  s.font_kind = FontKind::File;
  s.font_path = "/nonexistent/font.ttf";
  CHECK_THROWS_AS(render_glyph('a', s), ConfigError);
}
