// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "vtts/audio.hpp"

using namespace vtts;
using namespace vtts::audio;

namespace {

constexpr double kPi = 3.141592653589793238462643383279;

std::vector<double> tone(double freq, double seconds, int sr, double amp = 0.5) {
  std::vector<double> x(static_cast<size_t>(seconds * sr));
  for (size_t i = 0; i < x.size(); ++i) x[i] = amp * std::sin(2.0 * kPi * freq * i / sr);
  return x;
}

int dominant_bin(const std::vector<double>& x, int n_fft, int offset) {
  std::vector<std::complex<double>> buf(n_fft);
  for (int i = 0; i < n_fft; ++i) {
    double w = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n_fft);
    buf[i] = x[offset + i] * w;
  }
  fft(buf, false);
  int arg = 1;  // skip DC
  for (int b = 2; b < n_fft / 2; ++b)
    if (std::abs(buf[b]) > std::abs(buf[arg])) arg = b;
  return arg;
}

}  // namespace

TEST_CASE("fft of an impulse is flat and inverts exactly") {
  std::vector<std::complex<double>> buf(8, 0.0);
  buf[0] = 1.0;
  fft(buf, false);
  for (const auto& v : buf) CHECK(std::abs(v - std::complex<double>(1.0, 0.0)) < 1e-12);
  fft(buf, true);
  CHECK(std::abs(buf[0] - std::complex<double>(1.0, 0.0)) < 1e-12);
  for (int i = 1; i < 8; ++i) CHECK(std::abs(buf[i]) < 1e-12);
}

TEST_CASE("fft locates a pure tone's bin") {
  const int n = 256;
  std::vector<std::complex<double>> buf(n);
  for (int i = 0; i < n; ++i) buf[i] = std::cos(2.0 * kPi * 10.0 * i / n);
  fft(buf, false);
  int arg = 0;
  for (int b = 1; b < n / 2; ++b)
    if (std::abs(buf[b]) > std::abs(buf[arg])) arg = b;
  CHECK(arg == 10);
}

TEST_CASE("istft(stft(x)) reconstructs the interior of a random signal") {
  StftConfig cfg;
  Rng rng(5);
  std::vector<double> x(cfg.n_fft + 7 * cfg.hop);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  auto frames = stft(x, cfg);
  auto y = istft(frames, cfg);
  REQUIRE(y.size() >= x.size() - cfg.hop);
  // interior samples (where analysis windows fully overlap) must match
  for (size_t i = cfg.n_fft; i + cfg.n_fft < x.size(); ++i)
    CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-9));
}

TEST_CASE("mel filterbank rows are nonempty triangles") {
  StftConfig cfg;
  Mat fb = mel_filterbank(cfg);
  CHECK(fb.rows == 80);
  CHECK(fb.cols == 513);
  for (int m = 0; m < fb.rows; ++m) {
    double peak = 0.0;
    for (int b = 0; b < fb.cols; ++b) peak = std::max(peak, fb.at(m, b));
    CHECK(peak > 0.0);
    CHECK(peak <= 1.0 + 1e-12);
  }
}

TEST_CASE("an all-zero mel inverts to near-silence") {
  Mat mel(12, 80, 0.0);
  auto wave = griffin_lim(mel, 60);
  CHECK(wave.size() == 12u * 256u);
  double peak = 0.0;
  for (double v : wave) peak = std::max(peak, std::abs(v));
  CHECK(peak < 1e-3);
}

TEST_CASE("zero iterations still produce a finite waveform of T*hop samples") {
  Rng rng(6);
  Mat mel(9, 80);
  for (auto& v : mel.a) v = rng.uniform(0.0, 1.0);
  auto wave = griffin_lim(mel, 0);
  CHECK(wave.size() == 9u * 256u);
  for (double v : wave) CHECK(std::isfinite(v));
}

TEST_CASE("griffin-lim is deterministic") {
  Rng rng(7);
  Mat mel(10, 80);
  for (auto& v : mel.a) v = rng.uniform(0.0, 0.5);
  auto a = griffin_lim(mel, 20);
  auto b = griffin_lim(mel, 20);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("440 Hz tone round-trips through mel and back within one spectral bin") {
  StftConfig cfg;
  auto x = tone(440.0, 1.0, cfg.sample_rate);
  int ref_bin = dominant_bin(x, cfg.n_fft, cfg.sample_rate / 4);
  Mat mel = mel_of_signal(x, cfg);
  REQUIRE(mel.rows > 10);
  auto y = griffin_lim(mel, 60, cfg);
  REQUIRE(y.size() > static_cast<size_t>(cfg.n_fft + cfg.sample_rate / 4));
  int got_bin = dominant_bin(y, cfg.n_fft, cfg.sample_rate / 4);
  CHECK(std::abs(got_bin - ref_bin) <= 1);
}

TEST_CASE("griffin-lim rejects non-finite mels") {
  Mat mel(3, 80, 0.0);
  mel.at(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(griffin_lim(mel, 5), InputError);
}

TEST_CASE("wav files carry a correct RIFF header and payload size") {
  std::vector<double> samples(1000, 0.0);
  samples[3] = 0.5;
  samples[4] = -2.0;  // clamped
  std::string path =
      (std::filesystem::temp_directory_path() / "vtts_test.wav").string();
  write_wav(path, samples, 22050);
  std::ifstream is(path, std::ios::binary);
  std::string bytes(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>{});
  REQUIRE(bytes.size() == 44 + 2000);
  CHECK(bytes.substr(0, 4) == "RIFF");
  CHECK(bytes.substr(8, 4) == "WAVE");
  CHECK(bytes.substr(36, 4) == "data");
  // sample 4 clamps to -32767
  int16_t s4;
  std::memcpy(&s4, bytes.data() + 44 + 8, 2);
  CHECK(s4 == -32767);
  std::remove(path.c_str());
}
