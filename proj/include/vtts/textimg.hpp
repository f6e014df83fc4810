// SPDX-License-Identifier: Apache-2.0
//
// Deterministic monospace text rendering. Text becomes a grayscale image of
// fixed-width character cells; decorations (underline/bold/italic) and
// typeface variants are applied at the pixel level. A procedural synthetic
// font keeps the whole pipeline font-file-free and bit-reproducible.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vtts/common.hpp"

namespace vtts::textimg {

enum class FontKind { Synthetic, File };

struct RenderSpec {
  int char_width_px = 30;   // w
  int char_height_px = 30;  // h
  int font_size_pt = 15;    // fs, only meaningful for file fonts
  FontKind font_kind = FontKind::Synthetic;
  int synthetic_variant = 0;  // typeface id for the synthetic font
  std::string font_path;      // file fonts only
  int typeface_id = 0;

  static constexpr double kInk = 1.0;
  static constexpr double kBackground = 0.0;

  void validate() const;  // throws ConfigError
};

enum class DecorationKind { None, Underline, Bold, Italic };

struct Decoration {
  DecorationKind kind = DecorationKind::None;
  int start = 0;  // half-open character range [start, end)
  int end = 0;
};

DecorationKind decoration_kind_from_string(const std::string& s);
std::string to_string(DecorationKind kind);

/// Throws InputError unless every span is inside [0, n) ranges and spans are
/// pairwise non-overlapping.
void validate_decorations(const std::vector<Decoration>& decorations, int char_count);

struct VisualTextImage {
  Mat pixels;  // h x (n*w)
  int char_count = 0;
  RenderSpec spec;
};

/// 7x5 binary glyph bitmap of the procedural synthetic font.
struct GlyphBitmap {
  static constexpr int kRows = 7;
  static constexpr int kCols = 5;
  std::array<uint8_t, kRows * kCols> bits{};  // row-major, 0 or 1

  uint8_t at(int r, int c) const { return bits[r * kCols + c]; }
  uint8_t& at(int r, int c) { return bits[r * kCols + c]; }
  bool operator==(const GlyphBitmap& o) const { return bits == o.bits; }
};

// Composed block of the synthetic font: codepoints in
// [kComposedBase, kComposedBase + kComposedCount) are two-component stacks.
// For cp = kComposedBase + p*16 + q the glyph is the top 3 rows of component
// p's bitmap over the bottom 4 rows of component q's bitmap, with component
// bitmaps at codepoints kTopComponentBase + p and kBottomComponentBase + q.
// This gives the font a sub-character structure whose combination determines
// the identity of the full character.
constexpr uint32_t kComposedBase = 0xE000;
constexpr uint32_t kComposedCount = 256;  // p, q in [0, 16)
constexpr uint32_t kTopComponentBase = 0xE800;
constexpr uint32_t kBottomComponentBase = 0xE900;

constexpr bool is_composed_codepoint(uint32_t cp) {
  return cp >= kComposedBase && cp < kComposedBase + kComposedCount;
}
constexpr uint32_t composed_codepoint(int p, int q) {
  return kComposedBase + static_cast<uint32_t>(p) * 16 + static_cast<uint32_t>(q);
}
constexpr int composed_top(uint32_t cp) { return static_cast<int>((cp - kComposedBase) >> 4); }
constexpr int composed_bottom(uint32_t cp) { return static_cast<int>((cp - kComposedBase) & 15); }

// Procedural synthetic font.
//
// The bitmap of (codepoint, variant) is derived from SplitMix64 as follows:
//   key(cp, variant, attempt, cell) =
//       (cp << 22) | ((variant & 0xFF) << 14) | ((attempt & 0xFF) << 6) | cell
//   bit(cell) = splitmix64(key) & 1, cells numbered row-major r*5+c.
// Attempts are tried in order 0, 1, ...; an attempt is accepted when its 35
// bits are not all zero and the bitmap differs from the accepted bitmap of
// every lower variant of the same codepoint. Codepoint 32 (space) is the
// reserved blank: an all-zero bitmap, no attempt procedure. Codepoints in
// the composed block are stacks of their two component bitmaps (see above).
//
// Variants model typefaces: the same codepoint renders differently per
// variant while staying deterministic.
GlyphBitmap synthetic_glyph_bitmap(uint32_t codepoint, int variant_id);

/// Composed glyph: top 3 rows from `top`, bottom 4 rows from `bottom`.
/// Mirrors sub-character stacking in scripts whose reading is determined by
/// component structure.
GlyphBitmap stack_bitmaps(const GlyphBitmap& top, const GlyphBitmap& bottom);

/// Nearest-neighbor upscale of a bitmap to an h x w cell (ink 1.0 on 0.0).
Mat upscale_bitmap(const GlyphBitmap& bm, int h, int w);

struct GlyphCell {
  Mat pixels;                 // h x w
  bool used_fallback = false; // file-font fallback glyph was substituted
};

/// Renders one character cell. Deterministic; values in [0,1]; background is
/// exactly 0.0. File fonts require a rasterizer integration that is not
/// compiled in; requesting one throws ConfigError.
GlyphCell render_glyph(uint32_t codepoint, const RenderSpec& spec);

/// Applies a decoration to a run of k cells (h x k*w matrix):
///   underline: bottom 2 pixel rows set to ink across the run
///   bold:      1-pixel 4-neighborhood dilation of the ink
///   italic:    right shear, round(0.2*h) pixels total, linear in row index,
///              clipped to the run width
Mat apply_decoration(const Mat& cell_run, DecorationKind kind, const RenderSpec& spec);

/// Renders text (UTF-8) into an n*w wide image. Decorated spans are
/// transformed in place; empty text yields a width-0 image with n=0.
VisualTextImage render(const std::string& text_utf8, const RenderSpec& spec,
                       const std::vector<Decoration>& decorations = {});
VisualTextImage render(const std::vector<uint32_t>& codepoints, const RenderSpec& spec,
                       const std::vector<Decoration>& decorations = {});

/// Builds an image directly from per-character cells (each h x w). Used by
/// probes that feed composed glyphs through the pipeline.
VisualTextImage image_from_cells(const std::vector<Mat>& cells, const RenderSpec& spec);

}  // namespace vtts::textimg
