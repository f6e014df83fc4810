// SPDX-License-Identifier: Apache-2.0
#include "vtts/slicer.hpp"

namespace vtts::slicer {

void SliceSpec::validate() const {
  if (context_chars <= 0)
    throw ConfigError("slice context c must be positive, got " +
                      std::to_string(context_chars));
  if (context_chars % 2 == 0)
    throw ConfigError("slice context c must be odd, got " +
                      std::to_string(context_chars));
}

std::pair<int, int> pad_cells(int n, int c) {
  SliceSpec{c}.validate();
  (void)n;
  int half = (c - 1) / 2;
  return {half, half};
}

SlicedSequence slice(const textimg::VisualTextImage& image, const SliceSpec& spec) {
  spec.validate();
  const int c = spec.context_chars;
  const int w = image.spec.char_width_px;
  const int h = image.spec.char_height_px;
  const int n = image.char_count;
  const int half = (c - 1) / 2;

  SlicedSequence out;
  out.spec = spec;
  out.char_count = n;
  out.char_width = w;
  out.char_height = h;
  out.slices.reserve(n);
  for (int i = 0; i < n; ++i) {
    Mat s(h, w * c, textimg::RenderSpec::kBackground);
    for (int j = 0; j < c; ++j) {
      int cell = i + j - half;
      if (cell < 0 || cell >= n) continue;
      for (int r = 0; r < h; ++r)
        for (int x = 0; x < w; ++x) s.at(r, j * w + x) = image.pixels.at(r, cell * w + x);
    }
    out.slices.push_back(std::move(s));
  }
  return out;
}

}  // namespace vtts::slicer
