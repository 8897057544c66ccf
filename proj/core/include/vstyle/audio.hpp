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

#ifndef VSTYLE_AUDIO_HPP_
#define VSTYLE_AUDIO_HPP_

#include <complex>
#include <cstdint>
#include <vector>

#include "vstyle/error.hpp"

namespace vstyle::audio {

// Frontend defaults; frame shift/length are the only externally fixed values,
// the rest completes a 16 kHz analysis chain.
inline constexpr int kSampleRate = 16000;
inline constexpr int kNfft = 1024;
inline constexpr int kNumMels = 80;
inline constexpr double kFrameShiftMs = 12.5;
inline constexpr double kFrameLengthMs = 50.0;
inline constexpr double kFminHz = 50.0;
inline constexpr double kFmaxHz = 7600.0;
// Magnitude floor before log compression; log(kMagFloor) is the value silence
// maps to and the padding value everywhere downstream.
inline constexpr double kMagFloor = 1e-5;
double log_floor();  // log(kMagFloor)

struct Waveform {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate = kSampleRate;
};

// T x n_mels matrix of log-compressed mel magnitudes, row-major.
struct MelSpectrogram {
  std::vector<double> data;
  std::int64_t frames = 0;
  std::int64_t n_mels = kNumMels;
  double frame_shift_ms = kFrameShiftMs;
  double frame_length_ms = kFrameLengthMs;
  int sample_rate = kSampleRate;

  double& at(std::int64_t t, std::int64_t m) { return data[t * n_mels + m]; }
  double at(std::int64_t t, std::int64_t m) const {
    return data[t * n_mels + m];
  }
};

MelSpectrogram make_mel(std::int64_t frames, std::int64_t n_mels,
                        double fill_value);

// Triangular mel filterbank; rows are filters over FFT bins.
struct MelFilterbank {
  std::vector<double> weights;  // n_mels x n_bins
  std::int64_t n_mels = kNumMels;
  std::int64_t n_bins = kNfft / 2 + 1;
  int n_fft = kNfft;
  int sample_rate = kSampleRate;
  double f_min = kFminHz;
  double f_max = kFmaxHz;

  double at(std::int64_t m, std::int64_t k) const {
    return weights[m * n_bins + k];
  }
};

MelFilterbank make_mel_filterbank(std::int64_t n_mels = kNumMels,
                                  int n_fft = kNfft,
                                  int sample_rate = kSampleRate,
                                  double f_min = kFminHz,
                                  double f_max = kFmaxHz);

// Complex short-time spectrum, T x (n_fft/2 + 1).
struct Spectrogram {
  std::vector<std::complex<double>> data;
  std::int64_t frames = 0;
  std::int64_t n_bins = 0;

  std::complex<double>& at(std::int64_t t, std::int64_t k) {
    return data[t * n_bins + k];
  }
  std::complex<double> at(std::int64_t t, std::int64_t k) const {
    return data[t * n_bins + k];
  }
};

// Number of analysis frames for a signal of n samples:
// floor((n - frame_len) / shift) + 1.
std::int64_t stft_frame_count(std::int64_t n_samples,
                              std::int64_t frame_len_samples,
                              std::int64_t shift_samples);

// Hann-windowed STFT without centering; throws ContractError when the signal
// is shorter than one frame, ConfigError when n_fft is not a power of two or
// shorter than the frame.
Spectrogram stft(const Waveform& w, double frame_length_ms = kFrameLengthMs,
                 double frame_shift_ms = kFrameShiftMs, int n_fft = kNfft);

// Magnitudes of a complex spectrogram (same layout, real).
std::vector<double> magnitudes(const Spectrogram& s);

// log(max(fb * |STFT|, kMagFloor)). Sample rates of w and fb must agree.
MelSpectrogram mel_extract(const Waveform& w, const MelFilterbank& fb,
                           double frame_length_ms = kFrameLengthMs,
                           double frame_shift_ms = kFrameShiftMs);

// Least-squares pseudo-inverse projection of linear magnitudes (clamped at
// zero) from log-mel input; bridge to griffin_lim.
std::vector<double> mel_to_linear(const MelSpectrogram& m,
                                  const MelFilterbank& fb);

// Iterative phase reconstruction from linear magnitudes (T x n_bins,
// non-negative). Alternates magnitude substitution with an STFT-consistency
// projection; the spectral-convergence error is non-increasing per iteration
// and is appended to *convergence when provided.
Waveform griffin_lim(const std::vector<double>& linear_mag, std::int64_t frames,
                     int n_fft, int iters, int sample_rate = kSampleRate,
                     double frame_length_ms = kFrameLengthMs,
                     double frame_shift_ms = kFrameShiftMs,
                     std::vector<double>* convergence = nullptr);

// Overlap-add inverse STFT with squared-window normalization.
Waveform istft(const Spectrogram& s, int n_fft, int sample_rate,
               double frame_length_ms = kFrameLengthMs,
               double frame_shift_ms = kFrameShiftMs);

}  // namespace vstyle::audio

#endif  // VSTYLE_AUDIO_HPP_
