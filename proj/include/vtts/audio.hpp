// SPDX-License-Identifier: Apache-2.0
//
// Waveform plumbing: STFT/ISTFT, a mel filterbank with a regularized
// pseudo-inverse, Griffin-Lim phase reconstruction and 16-bit RIFF output.
// Mel values use log1p compression, so an all-zero mel is exact silence.
#pragma once

#include <complex>
#include <string>
#include <vector>

#include "vtts/common.hpp"

namespace vtts::audio {

struct StftConfig {
  int n_fft = 1024;
  int hop = 256;
  int sample_rate = 22050;
  int n_mels = 80;

  int bins() const { return n_fft / 2 + 1; }
  void validate() const;
};

/// In-place iterative radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& buf, bool inverse);

/// Frames at offsets t*hop, Hann window, no centering. Input shorter than
/// n_fft yields no frames.
std::vector<std::vector<std::complex<double>>> stft(const std::vector<double>& signal,
                                                    const StftConfig& cfg);

/// Overlap-add inverse with window-square normalization; output length is
/// (frames-1)*hop + n_fft.
std::vector<double> istft(const std::vector<std::vector<std::complex<double>>>& frames,
                          const StftConfig& cfg);

/// HTK-style triangular mel filterbank, n_mels x bins.
Mat mel_filterbank(const StftConfig& cfg);

/// T x n_mels log1p-compressed mel of a signal.
Mat mel_of_signal(const std::vector<double>& signal, const StftConfig& cfg);

/// Mel -> linear magnitudes via a ridge-regularized pseudo-inverse of the
/// filterbank; negatives are clamped to zero.
Mat mel_to_linear(const Mat& mel, const StftConfig& cfg);

/// Griffin-Lim with zero-phase init. iterations=0 degenerates to a plain
/// magnitude inversion. Output is trimmed to exactly T*hop samples
/// (synthesis frames are treated as centered, so half an FFT window is
/// dropped at each edge).
std::vector<double> griffin_lim(const Mat& mel, int iterations, const StftConfig& cfg);
std::vector<double> griffin_lim(const Mat& mel, int iterations = 60);

/// 16-bit PCM mono RIFF/WAVE; samples clamped to [-1, 1].
void write_wav(const std::string& path, const std::vector<double>& samples, int sample_rate);

}  // namespace vtts::audio
