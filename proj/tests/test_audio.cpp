// Copyright (c) 2026 The vstyle Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "vstyle/audio.hpp"
#include "vstyle/audio_io.hpp"
#include "vstyle/rng.hpp"

using namespace vstyle;
using namespace vstyle::audio;

namespace {

Waveform sine(double freq_hz, double seconds, double amp = 0.5,
              int rate = kSampleRate) {
  Waveform w;
  w.sample_rate = rate;
  const auto n = static_cast<std::int64_t>(seconds * rate);
  w.samples.resize(n);
  for (std::int64_t i = 0; i < n; ++i) {
    w.samples[i] = amp * std::sin(2.0 * M_PI * freq_hz * i / rate);
  }
  return w;
}

Waveform noise(double seconds, Rng& rng, double amp = 0.3) {
  Waveform w;
  w.samples.resize(static_cast<std::int64_t>(seconds * kSampleRate));
  for (auto& s : w.samples) s = rng.uniform(-amp, amp);
  return w;
}

}  // namespace

TEST_SUITE_BEGIN("audio");

TEST_CASE("stft frame count: one second at 16 kHz gives 77 frames") {
  Waveform w = sine(440.0, 1.0);
  Spectrogram s = stft(w);
  CHECK(s.frames == 77);  // (16000 - 800) / 200 + 1
  CHECK(s.n_bins == 513);
}

TEST_CASE("frame-count formula matches a brute-force enumerator") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::int64_t n = 1 + static_cast<std::int64_t>(rng.uniform_int(4000));
    const std::int64_t flen = 1 + static_cast<std::int64_t>(rng.uniform_int(400));
    const std::int64_t shift = 1 + static_cast<std::int64_t>(rng.uniform_int(200));
    std::int64_t brute = 0;
    for (std::int64_t start = 0; start + flen <= n; start += shift) brute += 1;
    CHECK(stft_frame_count(n, flen, shift) == brute);
  }
}

TEST_CASE("all-zero signal produces all-zero magnitudes") {
  Waveform w;
  w.samples.assign(16000, 0.0);
  const auto mag = magnitudes(stft(w));
  for (double v : mag) CHECK(v == 0.0);
}

TEST_CASE("pure 1 kHz sine peaks at bin 64") {
  Waveform w = sine(1000.0, 0.5);
  Spectrogram s = stft(w);
  const auto mag = magnitudes(s);
  // Average the per-frame argmax; every frame should agree.
  for (std::int64_t t = 0; t < s.frames; ++t) {
    const double* row = mag.data() + t * s.n_bins;
    const auto peak = std::max_element(row, row + s.n_bins) - row;
    CHECK(peak == 64);  // 1000 * 1024 / 16000
  }
}

TEST_CASE("signals shorter than one frame are rejected") {
  Waveform w;
  w.samples.assign(100, 0.1);  // frame is 800 samples
  CHECK_THROWS_AS(stft(w), ContractError);
}

TEST_CASE("parseval sanity within 5 percent") {
  Rng rng(8);
  Waveform w = noise(0.3, rng);
  const std::int64_t flen = 800, shift = 200, nfft = 1024;
  Spectrogram s = stft(w);
  // Windowed energy, frame by frame (Hann of length 800).
  std::vector<double> window(flen);
  for (std::int64_t i = 0; i < flen; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / flen);
  }
  double sig_energy = 0.0;
  for (std::int64_t t = 0; t < s.frames; ++t) {
    for (std::int64_t i = 0; i < flen; ++i) {
      const double v = w.samples[t * shift + i] * window[i];
      sig_energy += v * v;
    }
  }
  // DFT Parseval with a one-sided spectrum: double interior bins.
  double spec_energy = 0.0;
  for (std::int64_t t = 0; t < s.frames; ++t) {
    for (std::int64_t k = 0; k < s.n_bins; ++k) {
      const double m = std::abs(s.at(t, k));
      const double scale = (k == 0 || k == nfft / 2) ? 1.0 : 2.0;
      spec_energy += scale * m * m;
    }
  }
  spec_energy /= nfft;
  CHECK(spec_energy == doctest::Approx(sig_energy).epsilon(0.05));
}

TEST_CASE("mel filterbank rows and columns satisfy their bounds") {
  MelFilterbank fb = make_mel_filterbank();
  for (std::int64_t m = 0; m < fb.n_mels; ++m) {
    double row_max = 0.0;
    for (std::int64_t k = 0; k < fb.n_bins; ++k) {
      CHECK(fb.at(m, k) >= 0.0);
      row_max = std::max(row_max, fb.at(m, k));
    }
    CHECK(row_max > 0.0);
  }
  for (std::int64_t k = 0; k < fb.n_bins; ++k) {
    double col = 0.0;
    for (std::int64_t m = 0; m < fb.n_mels; ++m) col += fb.at(m, k);
    CHECK(col <= 2.0 + 1e-9);  // at most two triangles overlap
  }
}

TEST_CASE("silence maps to the log floor everywhere") {
  Waveform w;
  w.samples.assign(16000, 0.0);
  MelFilterbank fb = make_mel_filterbank();
  MelSpectrogram mel = mel_extract(w, fb);
  for (double v : mel.data) CHECK(v == log_floor());
}

TEST_CASE("white noise yields the documented shape") {
  Rng rng(4);
  Waveform w = noise(1.0, rng);
  MelSpectrogram mel = mel_extract(w, make_mel_filterbank());
  CHECK(mel.frames == 77);
  CHECK(mel.n_mels == 80);
}

TEST_CASE("doubling amplitude never decreases a mel entry") {
  Rng rng(5);
  Waveform w = noise(0.3, rng);
  Waveform w2 = w;
  for (auto& s : w2.samples) s *= 2.0;
  MelFilterbank fb = make_mel_filterbank();
  MelSpectrogram a = mel_extract(w, fb);
  MelSpectrogram b = mel_extract(w2, fb);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    CHECK(b.data[i] >= a.data[i]);
  }
}

TEST_CASE("sample-rate mismatch is a config error") {
  Waveform w = sine(440.0, 0.2, 0.5, 8000);
  CHECK_THROWS_AS(mel_extract(w, make_mel_filterbank()), ConfigError);
}

TEST_CASE("mel_extract is bit-deterministic") {
  Rng rng(6);
  Waveform w = noise(0.4, rng);
  MelFilterbank fb = make_mel_filterbank();
  MelSpectrogram a = mel_extract(w, fb);
  MelSpectrogram b = mel_extract(w, fb);
  CHECK(std::memcmp(a.data.data(), b.data.data(),
                    a.data.size() * sizeof(double)) == 0);
}

TEST_CASE("griffin_lim recovers a sine's dominant bin") {
  Waveform w = sine(1000.0, 0.5);
  Spectrogram s = stft(w);
  Waveform rec = griffin_lim(magnitudes(s), s.frames, kNfft, 60);
  Spectrogram rs = stft(rec);
  const auto mag = magnitudes(rs);
  // Dominant bin of the middle frame within one bin of the original.
  const std::int64_t t = rs.frames / 2;
  const double* row = mag.data() + t * rs.n_bins;
  const auto peak = std::max_element(row, row + rs.n_bins) - row;
  CHECK(std::abs(static_cast<double>(peak) - 64.0) <= 1.0);
}

TEST_CASE("griffin_lim on zero magnitudes returns a zero waveform") {
  std::vector<double> mag(10 * (kNfft / 2 + 1), 0.0);
  Waveform w = griffin_lim(mag, 10, kNfft, 3);
  for (double s : w.samples) CHECK(s == 0.0);
}

TEST_CASE("griffin_lim spectral convergence never increases") {
  Rng rng(9);
  Waveform w = noise(0.25, rng);
  Spectrogram s = stft(w);
  std::vector<double> conv;
  griffin_lim(magnitudes(s), s.frames, kNfft, 30, kSampleRate, kFrameLengthMs,
              kFrameShiftMs, &conv);
  REQUIRE(conv.size() == 30);
  for (std::size_t i = 1; i < conv.size(); ++i) {
    CHECK(conv[i] <= conv[i - 1] + 1e-12);
  }
  CHECK(conv.back() <= conv.front());
}

TEST_CASE("griffin_lim rejects negative magnitudes and iters < 1") {
  std::vector<double> mag(2 * (kNfft / 2 + 1), 1.0);
  mag[5] = -0.1;
  CHECK_THROWS_AS(griffin_lim(mag, 2, kNfft, 5), ContractError);
  mag[5] = 0.1;
  CHECK_THROWS_AS(griffin_lim(mag, 2, kNfft, 0), ContractError);
}

TEST_CASE("mel_to_linear round trip stays within 35 percent on smooth spectra") {
  MelFilterbank fb = make_mel_filterbank();
  Rng rng(10);
  // Smooth synthetic magnitude spectra: sums of broad Gaussians.
  const std::int64_t frames = 6;
  std::vector<double> lin(frames * fb.n_bins, 0.0);
  for (std::int64_t t = 0; t < frames; ++t) {
    const double c1 = rng.uniform(60.0, 320.0);
    const double c2 = rng.uniform(120.0, 420.0);
    for (std::int64_t k = 0; k < fb.n_bins; ++k) {
      lin[t * fb.n_bins + k] =
          std::exp(-(k - c1) * (k - c1) / (2 * 40.0 * 40.0)) +
          0.5 * std::exp(-(k - c2) * (k - c2) / (2 * 60.0 * 60.0));
    }
  }
  // linear -> mel (log) -> linear
  MelSpectrogram mel = make_mel(frames, fb.n_mels, 0.0);
  for (std::int64_t t = 0; t < frames; ++t) {
    for (std::int64_t m = 0; m < fb.n_mels; ++m) {
      double acc = 0.0;
      for (std::int64_t k = 0; k < fb.n_bins; ++k) {
        acc += fb.at(m, k) * lin[t * fb.n_bins + k];
      }
      mel.at(t, m) = std::log(std::max(acc, kMagFloor));
    }
  }
  const auto rec = mel_to_linear(mel, fb);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < lin.size(); ++i) {
    num += (rec[i] - lin[i]) * (rec[i] - lin[i]);
    den += lin[i] * lin[i];
  }
  CHECK(std::sqrt(num / den) <= 0.35);
}

TEST_CASE("mel_to_linear maps silence to exact zeros and clamps negatives") {
  MelFilterbank fb = make_mel_filterbank();
  MelSpectrogram silent = make_mel(4, fb.n_mels, log_floor());
  for (double v : mel_to_linear(silent, fb)) CHECK(v == 0.0);

  Rng rng(11);
  MelSpectrogram random_mel = make_mel(3, fb.n_mels, 0.0);
  for (auto& v : random_mel.data) v = rng.uniform(log_floor(), 1.0);
  for (double v : mel_to_linear(random_mel, fb)) CHECK(v >= 0.0);
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("audio_io");

TEST_CASE("wav round trip preserves samples to 16-bit resolution") {
  Waveform w = sine(660.0, 0.05, 0.8);
  const std::string path = "/tmp/vstyle_test.wav";
  wav_write(path, w);
  Waveform r = wav_read(path);
  REQUIRE(r.samples.size() == w.samples.size());
  CHECK(r.sample_rate == w.sample_rate);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    CHECK(std::abs(r.samples[i] - w.samples[i]) < 1.0 / 32000.0);
  }
  std::filesystem::remove(path);
}

TEST_CASE("wav_write rejects out-of-range samples") {
  Waveform w;
  w.samples = {0.0, 1.5};
  CHECK_THROWS_AS(wav_write("/tmp/vstyle_bad.wav", w), ContractError);
}

TEST_CASE("MEL1 round trip is bit-exact") {
  Rng rng(12);
  MelSpectrogram m = make_mel(9, 80, 0.0);
  for (auto& v : m.data) {
    v = static_cast<double>(static_cast<float>(rng.uniform(-12.0, 1.0)));
  }
  const std::string path = "/tmp/vstyle_test.mel";
  mel_write(path, m);
  MelSpectrogram r = mel_read(path);
  CHECK(r.frames == m.frames);
  CHECK(r.n_mels == m.n_mels);
  CHECK(r.frame_shift_ms == m.frame_shift_ms);
  CHECK(r.frame_length_ms == m.frame_length_ms);
  CHECK(r.sample_rate == m.sample_rate);
  CHECK(std::memcmp(r.data.data(), m.data.data(),
                    m.data.size() * sizeof(double)) == 0);
  // Re-serialization is byte-identical.
  const std::string path2 = "/tmp/vstyle_test2.mel";
  mel_write(path2, r);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), {});
  std::string b2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(b1 == b2);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("PGM export writes the documented header and size") {
  MelSpectrogram m = make_mel(12, 80, 0.0);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = i % 7;
  const std::string path = "/tmp/vstyle_test.pgm";
  pgm_write(path, m);
  std::ifstream f(path, std::ios::binary);
  std::string magic, dims1, dims2, maxval;
  f >> magic >> dims1 >> dims2 >> maxval;
  CHECK(magic == "P5");
  CHECK(dims1 == "12");  // time on the x-axis
  CHECK(dims2 == "80");
  CHECK(maxval == "255");
  f.get();
  std::string pixels((std::istreambuf_iterator<char>(f)), {});
  CHECK(pixels.size() == 12 * 80);
  std::filesystem::remove(path);
}

TEST_SUITE_END();
