// SPDX-License-Identifier: Apache-2.0
#include "vtts/textimg.hpp"

#include <algorithm>
#include <cmath>

namespace vtts::textimg {

void RenderSpec::validate() const {
  if (char_width_px <= 0 || char_height_px <= 0)
    throw ConfigError("RenderSpec: cell dimensions must be positive");
  if (font_size_pt <= 0) throw ConfigError("RenderSpec: font size must be positive");
  if (font_kind == FontKind::File && font_path.empty())
    throw ConfigError("RenderSpec: file font requires a font path");
}

DecorationKind decoration_kind_from_string(const std::string& s) {
  if (s == "none") return DecorationKind::None;
  if (s == "underline") return DecorationKind::Underline;
  if (s == "bold") return DecorationKind::Bold;
  if (s == "italic") return DecorationKind::Italic;
  throw InputError("unknown decoration kind: " + s);
}

std::string to_string(DecorationKind kind) {
  switch (kind) {
    case DecorationKind::None: return "none";
    case DecorationKind::Underline: return "underline";
    case DecorationKind::Bold: return "bold";
    case DecorationKind::Italic: return "italic";
  }
  return "none";
}

void validate_decorations(const std::vector<Decoration>& decorations, int char_count) {
  std::vector<std::pair<int, int>> spans;
  for (const auto& d : decorations) {
    if (d.kind == DecorationKind::None) continue;
    if (!(0 <= d.start && d.start < d.end && d.end <= char_count))
      throw InputError("decoration span [" + std::to_string(d.start) + "," +
                       std::to_string(d.end) + ") invalid for text of length " +
                       std::to_string(char_count));
    spans.emplace_back(d.start, d.end);
  }
  std::sort(spans.begin(), spans.end());
  for (size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].first < spans[i - 1].second)
      throw InputError("decoration spans overlap");
  }
}

namespace {

uint64_t glyph_key(uint32_t cp, int variant, int attempt, int cell) {
  return (static_cast<uint64_t>(cp) << 22) |
         (static_cast<uint64_t>(variant & 0xFF) << 14) |
         (static_cast<uint64_t>(attempt & 0xFF) << 6) | static_cast<uint64_t>(cell);
}

GlyphBitmap attempt_bitmap(uint32_t cp, int variant, int attempt) {
  GlyphBitmap bm;
  for (int cell = 0; cell < GlyphBitmap::kRows * GlyphBitmap::kCols; ++cell)
    bm.bits[cell] = static_cast<uint8_t>(splitmix64(glyph_key(cp, variant, attempt, cell)) & 1);
  return bm;
}

bool is_blank(const GlyphBitmap& bm) {
  for (uint8_t b : bm.bits)
    if (b) return false;
  return true;
}

}  // namespace

GlyphBitmap synthetic_glyph_bitmap(uint32_t codepoint, int variant_id) {
  if (codepoint == 32) return GlyphBitmap{};  // reserved blank
  if (is_composed_codepoint(codepoint)) {
    return stack_bitmaps(
        synthetic_glyph_bitmap(kTopComponentBase + composed_top(codepoint), variant_id),
        synthetic_glyph_bitmap(kBottomComponentBase + composed_bottom(codepoint),
                               variant_id));
  }
  std::vector<GlyphBitmap> accepted;
  for (int v = 0; v <= variant_id; ++v) {
    for (int attempt = 0;; ++attempt) {
      GlyphBitmap cand = attempt_bitmap(codepoint, v, attempt);
      if (is_blank(cand)) continue;
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

GlyphBitmap stack_bitmaps(const GlyphBitmap& top, const GlyphBitmap& bottom) {
  GlyphBitmap out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < GlyphBitmap::kCols; ++c) out.at(r, c) = top.at(r, c);
  for (int r = 3; r < GlyphBitmap::kRows; ++r)
    for (int c = 0; c < GlyphBitmap::kCols; ++c) out.at(r, c) = bottom.at(r, c);
  return out;
}

Mat upscale_bitmap(const GlyphBitmap& bm, int h, int w) {
  Mat cell(h, w, RenderSpec::kBackground);
  for (int r = 0; r < h; ++r) {
    int sr = r * GlyphBitmap::kRows / h;
    for (int c = 0; c < w; ++c) {
      int sc = c * GlyphBitmap::kCols / w;
      if (bm.at(sr, sc)) cell.at(r, c) = RenderSpec::kInk;
    }
  }
  return cell;
}

GlyphCell render_glyph(uint32_t codepoint, const RenderSpec& spec) {
  spec.validate();
  if (spec.font_kind == FontKind::File)
    throw ConfigError(
        "file-font rendering requires a rasterizer integration that is not "
        "compiled in; use the synthetic font");
  GlyphCell out;
  out.pixels = upscale_bitmap(synthetic_glyph_bitmap(codepoint, spec.synthetic_variant),
                              spec.char_height_px, spec.char_width_px);
  return out;
}

Mat apply_decoration(const Mat& cell_run, DecorationKind kind, const RenderSpec& spec) {
  if (kind == DecorationKind::None)
    throw InputError("apply_decoration: kind must not be none");
  const int h = cell_run.rows;
  const int width = cell_run.cols;
  Mat out = cell_run;
  switch (kind) {
    case DecorationKind::Underline: {
      for (int r = std::max(0, h - 2); r < h; ++r)
        for (int c = 0; c < width; ++c) out.at(r, c) = RenderSpec::kInk;
      break;
    }
    case DecorationKind::Bold: {
      // grayscale dilation with the 4-neighborhood (plus center)
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < width; ++c) {
          double m = cell_run.at(r, c);
          if (r > 0) m = std::max(m, cell_run.at(r - 1, c));
          if (r + 1 < h) m = std::max(m, cell_run.at(r + 1, c));
          if (c > 0) m = std::max(m, cell_run.at(r, c - 1));
          if (c + 1 < width) m = std::max(m, cell_run.at(r, c + 1));
          out.at(r, c) = m;
        }
      }
      break;
    }
    case DecorationKind::Italic: {
      const int total = static_cast<int>(std::lround(0.2 * h));
      for (int r = 0; r < h; ++r) {
        int shift = (h > 1)
            ? static_cast<int>(std::lround(static_cast<double>(total) * (h - 1 - r) / (h - 1)))
            : 0;
        for (int c = 0; c < width; ++c) {
          int src = c - shift;
          out.at(r, c) = (src >= 0 && src < width) ? cell_run.at(r, src)
                                                   : RenderSpec::kBackground;
        }
      }
      break;
    }
    case DecorationKind::None:
      break;
  }
  (void)spec;
  return out;
}

VisualTextImage render(const std::vector<uint32_t>& codepoints, const RenderSpec& spec,
                       const std::vector<Decoration>& decorations) {
  spec.validate();
  const int n = static_cast<int>(codepoints.size());
  validate_decorations(decorations, n);
  const int w = spec.char_width_px;
  const int h = spec.char_height_px;

  VisualTextImage img;
  img.char_count = n;
  img.spec = spec;
  img.pixels = Mat(h, n * w, RenderSpec::kBackground);
  for (int i = 0; i < n; ++i) {
    GlyphCell cell = render_glyph(codepoints[i], spec);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) img.pixels.at(r, i * w + c) = cell.pixels.at(r, c);
  }
  for (const auto& d : decorations) {
    if (d.kind == DecorationKind::None) continue;
    const int c0 = d.start * w;
    const int run_w = (d.end - d.start) * w;
    Mat run(h, run_w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < run_w; ++c) run.at(r, c) = img.pixels.at(r, c0 + c);
    Mat decorated = apply_decoration(run, d.kind, spec);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < run_w; ++c) img.pixels.at(r, c0 + c) = decorated.at(r, c);
  }
  return img;
}

VisualTextImage render(const std::string& text_utf8, const RenderSpec& spec,
                       const std::vector<Decoration>& decorations) {
  return render(utf8_decode(text_utf8), spec, decorations);
}

VisualTextImage image_from_cells(const std::vector<Mat>& cells, const RenderSpec& spec) {
  spec.validate();
  const int w = spec.char_width_px;
  const int h = spec.char_height_px;
  const int n = static_cast<int>(cells.size());
  VisualTextImage img;
  img.char_count = n;
  img.spec = spec;
  img.pixels = Mat(h, n * w, RenderSpec::kBackground);
  for (int i = 0; i < n; ++i) {
    if (cells[i].rows != h || cells[i].cols != w)
      throw InputError("image_from_cells: cell " + std::to_string(i) + " has shape " +
                       std::to_string(cells[i].rows) + "x" + std::to_string(cells[i].cols) +
                       ", expected " + std::to_string(h) + "x" + std::to_string(w));
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) img.pixels.at(r, i * w + c) = cells[i].at(r, c);
  }
  return img;
}

}  // namespace vtts::textimg
