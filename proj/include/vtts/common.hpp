// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace vtts {

// Invalid configuration (bad hyperparameter, malformed config file, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Invalid runtime input (shape mismatch, malformed record, ...).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// File-level failure (missing file, bad magic, truncated payload, ...).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Row-major dense matrix of doubles. The shared currency for images,
/// feature sequences and spectrograms.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0)
      : rows(r), cols(c), a(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {}

  double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return a.size(); }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

bool bit_equal(const Mat& x, const Mat& y);

/// SplitMix64 finalizer. Every deterministic pseudo-random choice in the
/// project (glyph bitmaps, corpus generation, parameter init) bottoms out
/// here, so results are identical across platforms.
constexpr uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Deterministic RNG backed by a SplitMix64 stream. Does not depend on
/// libstdc++ distribution internals, so sequences are reproducible
/// everywhere.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal();

  /// Uniform integer in [lo, hi], inclusive.
  int uniform_int(int lo, int hi);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = next_u64() % i;
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Decodes UTF-8 into codepoints. Throws InputError on malformed input.
std::vector<uint32_t> utf8_decode(const std::string& s);
std::string utf8_encode(const std::vector<uint32_t>& cps);
std::string utf8_encode(uint32_t cp);

}  // namespace vtts
