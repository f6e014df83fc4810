// SPDX-License-Identifier: Apache-2.0
//
// Sliding-window slicing: one window of width w*c per character, stride w,
// blank cells padded at both edges so every character gets a full window.
#pragma once

#include <utility>
#include <vector>

#include "vtts/common.hpp"
#include "vtts/textimg.hpp"

namespace vtts::slicer {

struct SliceSpec {
  int context_chars = 1;  // c: odd, >= 1

  void validate() const;  // throws ConfigError for even or non-positive c
  int window_width(int char_width_px) const { return char_width_px * context_chars; }
};

struct SlicedSequence {
  std::vector<Mat> slices;  // n matrices, each h x (w*c)
  SliceSpec spec;
  int char_count = 0;
  int char_width = 0;
  int char_height = 0;
};

/// Cells of blank padding on each side: ((c-1)/2, (c-1)/2).
std::pair<int, int> pad_cells(int n, int c);

/// Slice i covers character cells [i-(c-1)/2, i+(c-1)/2]; out-of-range cells
/// are background. The center cell of slice i equals image cell i bit-exact.
SlicedSequence slice(const textimg::VisualTextImage& image, const SliceSpec& spec);

}  // namespace vtts::slicer
