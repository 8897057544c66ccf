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

#include "vstyle/audio.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace vstyle::audio {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 complex FFT (inverse when `inv`).
void fft_radix2(std::vector<std::complex<double>>& a, bool inv) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * M_PI / static_cast<double>(len) * (inv ? 1 : -1);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const auto u = a[i + j];
        const auto v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inv) {
    for (auto& x : a) x /= static_cast<double>(n);
  }
}

std::vector<double> hann_window(std::int64_t len) {
  std::vector<double> w(len);
  for (std::int64_t i = 0; i < len; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                                static_cast<double>(len));
  }
  return w;
}

std::int64_t ms_to_samples(double ms, int sample_rate) {
  return static_cast<std::int64_t>(std::lround(ms * sample_rate / 1000.0));
}

}  // namespace

double log_floor() { return std::log(kMagFloor); }

MelSpectrogram make_mel(std::int64_t frames, std::int64_t n_mels,
                        double fill_value) {
  MelSpectrogram m;
  m.frames = frames;
  m.n_mels = n_mels;
  m.data.assign(frames * n_mels, fill_value);
  return m;
}

std::int64_t stft_frame_count(std::int64_t n_samples,
                              std::int64_t frame_len_samples,
                              std::int64_t shift_samples) {
  if (n_samples < frame_len_samples) return 0;
  return (n_samples - frame_len_samples) / shift_samples + 1;
}

Spectrogram stft(const Waveform& w, double frame_length_ms,
                 double frame_shift_ms, int n_fft) {
  if (!is_pow2(n_fft)) {
    throw ConfigError("n_fft must be a power of two, got " +
                      std::to_string(n_fft));
  }
  const std::int64_t flen = ms_to_samples(frame_length_ms, w.sample_rate);
  const std::int64_t shift = ms_to_samples(frame_shift_ms, w.sample_rate);
  if (flen > n_fft) {
    throw ConfigError("frame length " + std::to_string(flen) +
                      " samples exceeds n_fft " + std::to_string(n_fft));
  }
  const std::int64_t n = static_cast<std::int64_t>(w.samples.size());
  const std::int64_t frames = stft_frame_count(n, flen, shift);
  if (frames < 1) {
    throw ContractError("signal of " + std::to_string(n) +
                        " samples is shorter than one frame (" +
                        std::to_string(flen) + ")");
  }
  const auto window = hann_window(flen);
  Spectrogram out;
  out.frames = frames;
  out.n_bins = n_fft / 2 + 1;
  out.data.resize(frames * out.n_bins);
  std::vector<std::complex<double>> buf(n_fft);
  for (std::int64_t t = 0; t < frames; ++t) {
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    const double* src = w.samples.data() + t * shift;
    for (std::int64_t i = 0; i < flen; ++i) buf[i] = src[i] * window[i];
    fft_radix2(buf, false);
    std::copy_n(buf.begin(), out.n_bins, out.data.begin() + t * out.n_bins);
  }
  return out;
}

std::vector<double> magnitudes(const Spectrogram& s) {
  std::vector<double> out(s.data.size());
  for (std::size_t i = 0; i < s.data.size(); ++i) out[i] = std::abs(s.data[i]);
  return out;
}

namespace {

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) {
  return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0);
}

}  // namespace

MelFilterbank make_mel_filterbank(std::int64_t n_mels, int n_fft,
                                  int sample_rate, double f_min, double f_max) {
  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.n_fft = n_fft;
  fb.n_bins = n_fft / 2 + 1;
  fb.sample_rate = sample_rate;
  fb.f_min = f_min;
  fb.f_max = f_max;
  fb.weights.assign(fb.n_mels * fb.n_bins, 0.0);

  const double mel_lo = hz_to_mel(f_min);
  const double mel_hi = hz_to_mel(f_max);
  std::vector<double> edges(n_mels + 2);
  for (std::int64_t i = 0; i < n_mels + 2; ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(n_mels + 1));
  }
  for (std::int64_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (std::int64_t k = 0; k < fb.n_bins; ++k) {
      const double f =
          static_cast<double>(k) * sample_rate / static_cast<double>(n_fft);
      double v = 0.0;
      if (f > lo && f < hi) {
        v = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
      }
      fb.weights[m * fb.n_bins + k] = v;
    }
  }
  return fb;
}

MelSpectrogram mel_extract(const Waveform& w, const MelFilterbank& fb,
                           double frame_length_ms, double frame_shift_ms) {
  if (w.sample_rate != fb.sample_rate) {
    throw ConfigError("waveform rate " + std::to_string(w.sample_rate) +
                      " != filterbank rate " + std::to_string(fb.sample_rate));
  }
  const Spectrogram spec = stft(w, frame_length_ms, frame_shift_ms, fb.n_fft);
  const auto mag = magnitudes(spec);
  MelSpectrogram mel = make_mel(spec.frames, fb.n_mels, 0.0);
  mel.frame_shift_ms = frame_shift_ms;
  mel.frame_length_ms = frame_length_ms;
  mel.sample_rate = w.sample_rate;
  for (std::int64_t t = 0; t < spec.frames; ++t) {
    for (std::int64_t m = 0; m < fb.n_mels; ++m) {
      double acc = 0.0;
      const double* wrow = fb.weights.data() + m * fb.n_bins;
      const double* mrow = mag.data() + t * spec.n_bins;
      for (std::int64_t k = 0; k < fb.n_bins; ++k) acc += wrow[k] * mrow[k];
      mel.at(t, m) = std::log(std::max(acc, kMagFloor));
    }
  }
  return mel;
}

std::vector<double> mel_to_linear(const MelSpectrogram& m,
                                  const MelFilterbank& fb) {
  if (m.n_mels != fb.n_mels) {
    throw ConfigError("mel count mismatch: " + std::to_string(m.n_mels) +
                      " vs " + std::to_string(fb.n_mels));
  }
  using Mat = Eigen::MatrixXd;
  // Copy into Eigen-owned (aligned) storage so the solve is bit-reproducible.
  Mat fbm(fb.n_mels, fb.n_bins);
  for (std::int64_t m = 0; m < fb.n_mels; ++m)
    for (std::int64_t k = 0; k < fb.n_bins; ++k) fbm(m, k) = fb.at(m, k);
  // Minimum-norm solution lin = Fb^T (Fb Fb^T)^-1 mel, clamped at zero.
  Mat gram = fbm * fbm.transpose();
  Eigen::LDLT<Mat> solver(gram);
  const double floor_log = log_floor();
  std::vector<double> out(m.frames * fb.n_bins, 0.0);
  Eigen::VectorXd melvec(fb.n_mels);
  for (std::int64_t t = 0; t < m.frames; ++t) {
    for (std::int64_t i = 0; i < fb.n_mels; ++i) {
      const double v = m.at(t, i);
      // Entries at the log floor are silence, not 1e-5 worth of energy.
      melvec[i] = v <= floor_log ? 0.0 : std::exp(v);
    }
    if (melvec.isZero(0.0)) continue;
    Eigen::VectorXd lin = fbm.transpose() * solver.solve(melvec);
    for (std::int64_t k = 0; k < fb.n_bins; ++k)
      out[t * fb.n_bins + k] = std::max(lin[k], 0.0);
  }
  return out;
}

Waveform istft(const Spectrogram& s, int n_fft, int sample_rate,
               double frame_length_ms, double frame_shift_ms) {
  const std::int64_t flen = ms_to_samples(frame_length_ms, sample_rate);
  const std::int64_t shift = ms_to_samples(frame_shift_ms, sample_rate);
  const auto window = hann_window(flen);
  const std::int64_t n_out = (s.frames - 1) * shift + flen;
  std::vector<double> acc(n_out, 0.0), norm(n_out, 0.0);
  std::vector<std::complex<double>> buf(n_fft);
  for (std::int64_t t = 0; t < s.frames; ++t) {
    // Rebuild the full conjugate-symmetric spectrum from the half kept.
    for (std::int64_t k = 0; k < s.n_bins; ++k) buf[k] = s.at(t, k);
    for (std::int64_t k = s.n_bins; k < n_fft; ++k)
      buf[k] = std::conj(s.at(t, n_fft - k));
    fft_radix2(buf, true);
    double* dst = acc.data() + t * shift;
    double* nrm = norm.data() + t * shift;
    for (std::int64_t i = 0; i < flen; ++i) {
      dst[i] += buf[i].real() * window[i];
      nrm[i] += window[i] * window[i];
    }
  }
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(n_out);
  for (std::int64_t i = 0; i < n_out; ++i) {
    w.samples[i] = norm[i] > 1e-9 ? acc[i] / norm[i] : 0.0;
  }
  return w;
}

Waveform griffin_lim(const std::vector<double>& linear_mag,
                     std::int64_t frames, int n_fft, int iters,
                     int sample_rate, double frame_length_ms,
                     double frame_shift_ms, std::vector<double>* convergence) {
  if (iters < 1) throw ContractError("griffin_lim requires iters >= 1");
  const std::int64_t n_bins = n_fft / 2 + 1;
  if (frames * n_bins != static_cast<std::int64_t>(linear_mag.size())) {
    throw ContractError("griffin_lim magnitude size mismatch");
  }
  double mag_norm_sq = 0.0;
  for (double v : linear_mag) {
    if (v < 0.0) throw ContractError("griffin_lim magnitudes must be >= 0");
    mag_norm_sq += v * v;
  }

  Spectrogram s;
  s.frames = frames;
  s.n_bins = n_bins;
  s.data.resize(frames * n_bins);
  // Zero initial phase keeps the whole reconstruction deterministic.
  for (std::size_t i = 0; i < linear_mag.size(); ++i)
    s.data[i] = std::complex<double>(linear_mag[i], 0.0);

  Waveform w;
  for (int it = 0; it < iters; ++it) {
    w = istft(s, n_fft, sample_rate, frame_length_ms, frame_shift_ms);
    const Spectrogram re = stft(w, frame_length_ms, frame_shift_ms, n_fft);
    if (convergence) {
      double err = 0.0;
      for (std::size_t i = 0; i < linear_mag.size(); ++i) {
        const double d = std::abs(re.data[i]) - linear_mag[i];
        err += d * d;
      }
      convergence->push_back(
          mag_norm_sq > 0.0 ? std::sqrt(err / mag_norm_sq) : 0.0);
    }
    // Keep the consistent phase, substitute the target magnitude.
    for (std::size_t i = 0; i < linear_mag.size(); ++i) {
      const double a = std::abs(re.data[i]);
      s.data[i] = a > 1e-12 ? re.data[i] * (linear_mag[i] / a)
                            : std::complex<double>(linear_mag[i], 0.0);
    }
  }
  return istft(s, n_fft, sample_rate, frame_length_ms, frame_shift_ms);
}

}  // namespace vstyle::audio
