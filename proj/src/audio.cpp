// SPDX-License-Identifier: Apache-2.0
#include "vtts/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace vtts::audio {

namespace {
constexpr double kPi = 3.141592653589793238462643383279;

std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n);
  return w;
}

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Cholesky solve of (A + ridge*I) x = b for symmetric positive definite A.
struct CholeskySolver {
  int n = 0;
  std::vector<double> L;  // lower triangular, row-major

  explicit CholeskySolver(const Mat& a, double ridge) : n(a.rows), L(size_t(n) * n, 0.0) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j <= i; ++j) {
        double s = a.at(i, j) + (i == j ? ridge : 0.0);
        for (int k = 0; k < j; ++k) s -= L[size_t(i) * n + k] * L[size_t(j) * n + k];
        if (i == j) {
          if (s <= 0.0) throw InputError("mel pseudo-inverse: matrix not positive definite");
          L[size_t(i) * n + j] = std::sqrt(s);
        } else {
          L[size_t(i) * n + j] = s / L[size_t(j) * n + j];
        }
      }
    }
  }

  std::vector<double> solve(const std::vector<double>& b) const {
    std::vector<double> y(n), x(n);
    for (int i = 0; i < n; ++i) {
      double s = b[i];
      for (int k = 0; k < i; ++k) s -= L[size_t(i) * n + k] * y[k];
      y[i] = s / L[size_t(i) * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
      double s = y[i];
      for (int k = i + 1; k < n; ++k) s -= L[size_t(k) * n + i] * x[k];
      x[i] = s / L[size_t(i) * n + i];
    }
    return x;
  }
};

}  // namespace

void StftConfig::validate() const {
  if (n_fft <= 0 || (n_fft & (n_fft - 1)) != 0)
    throw ConfigError("stft: n_fft must be a power of two");
  if (hop <= 0 || hop > n_fft) throw ConfigError("stft: bad hop");
  if (n_mels <= 0 || sample_rate <= 0) throw ConfigError("stft: bad mel/sample rate");
}

void fft(std::vector<std::complex<double>>& buf, bool inverse) {
  const size_t n = buf.size();
  if (n == 0 || (n & (n - 1)) != 0) throw InputError("fft: size must be a power of two");
  // bit reversal
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(buf[i], buf[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = buf[i + k];
        std::complex<double> v = buf[i + k + len / 2] * w;
        buf[i + k] = u + v;
        buf[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse)
    for (auto& x : buf) x /= static_cast<double>(n);
}

std::vector<std::vector<std::complex<double>>> stft(const std::vector<double>& signal,
                                                    const StftConfig& cfg) {
  cfg.validate();
  std::vector<std::vector<std::complex<double>>> frames;
  if (static_cast<int>(signal.size()) < cfg.n_fft) return frames;
  auto win = hann_window(cfg.n_fft);
  int count = 1 + (static_cast<int>(signal.size()) - cfg.n_fft) / cfg.hop;
  std::vector<std::complex<double>> buf(cfg.n_fft);
  for (int t = 0; t < count; ++t) {
    for (int i = 0; i < cfg.n_fft; ++i)
      buf[i] = signal[t * cfg.hop + i] * win[i];
    fft(buf, false);
    frames.emplace_back(buf.begin(), buf.begin() + cfg.bins());
  }
  return frames;
}

std::vector<double> istft(const std::vector<std::vector<std::complex<double>>>& frames,
                          const StftConfig& cfg) {
  cfg.validate();
  const int T = static_cast<int>(frames.size());
  if (T == 0) return {};
  auto win = hann_window(cfg.n_fft);
  const int total = (T - 1) * cfg.hop + cfg.n_fft;
  std::vector<double> out(total, 0.0);
  std::vector<double> wsum(total, 0.0);
  std::vector<std::complex<double>> buf(cfg.n_fft);
  for (int t = 0; t < T; ++t) {
    if (static_cast<int>(frames[t].size()) != cfg.bins())
      throw InputError("istft: frame has wrong bin count");
    for (int i = 0; i < cfg.bins(); ++i) buf[i] = frames[t][i];
    for (int i = cfg.bins(); i < cfg.n_fft; ++i) buf[i] = std::conj(frames[t][cfg.n_fft - i]);
    fft(buf, true);
    for (int i = 0; i < cfg.n_fft; ++i) {
      out[t * cfg.hop + i] += buf[i].real() * win[i];
      wsum[t * cfg.hop + i] += win[i] * win[i];
    }
  }
  for (int i = 0; i < total; ++i)
    if (wsum[i] > 1e-9) out[i] /= wsum[i];
  return out;
}

Mat mel_filterbank(const StftConfig& cfg) {
  cfg.validate();
  const int bins = cfg.bins();
  const double fmax = cfg.sample_rate / 2.0;
  const double mel_max = hz_to_mel(fmax);
  std::vector<double> centers(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i)
    centers[i] = mel_to_hz(mel_max * i / (cfg.n_mels + 1));
  Mat fb(cfg.n_mels, bins, 0.0);
  for (int m = 0; m < cfg.n_mels; ++m) {
    double lo = centers[m];
    double mid = centers[m + 1];
    double hi = centers[m + 2];
    for (int b = 0; b < bins; ++b) {
      double f = static_cast<double>(b) * cfg.sample_rate / cfg.n_fft;
      double w = 0.0;
      if (f > lo && f < mid)
        w = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi)
        w = (hi - f) / (hi - mid);
      fb.at(m, b) = w;
    }
  }
  return fb;
}

Mat mel_of_signal(const std::vector<double>& signal, const StftConfig& cfg) {
  auto frames = stft(signal, cfg);
  Mat fb = mel_filterbank(cfg);
  Mat mel(static_cast<int>(frames.size()), cfg.n_mels, 0.0);
  for (size_t t = 0; t < frames.size(); ++t) {
    for (int m = 0; m < cfg.n_mels; ++m) {
      double s = 0.0;
      for (int b = 0; b < cfg.bins(); ++b) s += fb.at(m, b) * std::abs(frames[t][b]);
      mel.at(static_cast<int>(t), m) = std::log1p(s);
    }
  }
  return mel;
}

Mat mel_to_linear(const Mat& mel, const StftConfig& cfg) {
  Mat fb = mel_filterbank(cfg);
  const int bins = cfg.bins();
  // gram = fb * fb^T (n_mels x n_mels)
  Mat gram(cfg.n_mels, cfg.n_mels, 0.0);
  for (int i = 0; i < cfg.n_mels; ++i)
    for (int j = 0; j <= i; ++j) {
      double s = 0.0;
      for (int b = 0; b < bins; ++b) s += fb.at(i, b) * fb.at(j, b);
      gram.at(i, j) = s;
      gram.at(j, i) = s;
    }
  CholeskySolver solver(gram, 1e-8);
  Mat lin(mel.rows, bins, 0.0);
  std::vector<double> amp(cfg.n_mels);
  for (int t = 0; t < mel.rows; ++t) {
    for (int m = 0; m < cfg.n_mels; ++m) {
      double v = mel.at(t, m);
      amp[m] = v > 0.0 ? std::expm1(v) : 0.0;
    }
    auto coef = solver.solve(amp);  // lin = fb^T * (gram + ridge)^-1 * amp
    for (int b = 0; b < bins; ++b) {
      double s = 0.0;
      for (int m = 0; m < cfg.n_mels; ++m) s += fb.at(m, b) * coef[m];
      lin.at(t, b) = s > 0.0 ? s : 0.0;
    }
  }
  return lin;
}

std::vector<double> griffin_lim(const Mat& mel, int iterations, const StftConfig& cfg) {
  for (double v : mel.a)
    if (!std::isfinite(v)) throw InputError("griffin_lim: non-finite mel value");
  const int T = mel.rows;
  if (T < 1) throw InputError("griffin_lim: empty mel");
  Mat mag = mel_to_linear(mel, cfg);
  const int bins = cfg.bins();
  // zero-phase init
  std::vector<std::vector<std::complex<double>>> spec(T);
  for (int t = 0; t < T; ++t) {
    spec[t].resize(bins);
    for (int b = 0; b < bins; ++b) spec[t][b] = {mag.at(t, b), 0.0};
  }
  for (int it = 0; it < iterations; ++it) {
    auto x = istft(spec, cfg);
    auto est = stft(x, cfg);
    for (int t = 0; t < T && t < static_cast<int>(est.size()); ++t)
      for (int b = 0; b < bins; ++b) {
        double a = std::abs(est[t][b]);
        spec[t][b] = a > 1e-12 ? est[t][b] / a * mag.at(t, b)
                               : std::complex<double>(mag.at(t, b), 0.0);
      }
  }
  auto full = istft(spec, cfg);
  // centered trim to exactly T*hop samples
  const int offset = cfg.n_fft / 2;
  std::vector<double> out(static_cast<size_t>(T) * cfg.hop, 0.0);
  for (size_t i = 0; i < out.size(); ++i) {
    size_t src = offset + i;
    if (src < full.size()) out[i] = full[src];
  }
  return out;
}

std::vector<double> griffin_lim(const Mat& mel, int iterations) {
  StftConfig cfg;
  cfg.n_mels = mel.cols;
  return griffin_lim(mel, iterations, cfg);
}

void write_wav(const std::string& path, const std::vector<double>& samples, int sample_rate) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  auto put_u32 = [&](uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
    os.write(reinterpret_cast<const char*>(b), 4);
  };
  auto put_u16 = [&](uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF)};
    os.write(reinterpret_cast<const char*>(b), 2);
  };
  const uint32_t data_bytes = static_cast<uint32_t>(samples.size() * 2);
  os.write("RIFF", 4);
  put_u32(36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put_u32(16);
  put_u16(1);  // PCM
  put_u16(1);  // mono
  put_u32(static_cast<uint32_t>(sample_rate));
  put_u32(static_cast<uint32_t>(sample_rate * 2));
  put_u16(2);
  put_u16(16);
  os.write("data", 4);
  put_u32(data_bytes);
  for (double s : samples) {
    double c = std::clamp(s, -1.0, 1.0);
    int16_t v = static_cast<int16_t>(std::lround(c * 32767.0));
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF)};
    os.write(reinterpret_cast<const char*>(b), 2);
  }
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace vtts::audio
