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

#include "vstyle/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace vstyle::audio {

namespace {

void write_u32(std::ofstream& f, std::uint32_t v) {
  f.write(reinterpret_cast<const char*>(&v), 4);
}
void write_u16(std::ofstream& f, std::uint16_t v) {
  f.write(reinterpret_cast<const char*>(&v), 2);
}
void write_f32(std::ofstream& f, float v) {
  f.write(reinterpret_cast<const char*>(&v), 4);
}
std::uint32_t read_u32(std::ifstream& f) {
  std::uint32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
std::uint16_t read_u16(std::ifstream& f) {
  std::uint16_t v = 0;
  f.read(reinterpret_cast<char*>(&v), 2);
  return v;
}
float read_f32(std::ifstream& f) {
  float v = 0;
  f.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

}  // namespace

void wav_write(const std::string& path, const Waveform& w) {
  for (double s : w.samples) {
    if (!std::isfinite(s)) throw ContractError("waveform sample not finite");
    if (std::abs(s) > 1.0 + 1e-9) {
      throw ContractError("waveform sample " + std::to_string(s) +
                          " outside [-1, 1]");
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  const std::uint32_t n = static_cast<std::uint32_t>(w.samples.size());
  const std::uint32_t data_bytes = n * 2;
  const std::uint32_t rate = static_cast<std::uint32_t>(w.sample_rate);
  f.write("RIFF", 4);
  write_u32(f, 36 + data_bytes);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  write_u32(f, 16);
  write_u16(f, 1);  // PCM
  write_u16(f, 1);  // mono
  write_u32(f, rate);
  write_u32(f, rate * 2);  // byte rate
  write_u16(f, 2);         // block align
  write_u16(f, 16);        // bits per sample
  f.write("data", 4);
  write_u32(f, data_bytes);
  for (double s : w.samples) {
    const double c = std::clamp(s, -1.0, 1.0);
    const auto v = static_cast<std::int16_t>(std::lround(c * 32767.0));
    f.write(reinterpret_cast<const char*>(&v), 2);
  }
  if (!f) throw IoError("short write to '" + path + "'");
}

Waveform wav_read(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  char tag[4];
  f.read(tag, 4);
  if (!f || std::memcmp(tag, "RIFF", 4) != 0) {
    throw ParseError("'" + path + "' is not a RIFF file");
  }
  read_u32(f);  // riff size
  f.read(tag, 4);
  if (std::memcmp(tag, "WAVE", 4) != 0) {
    throw ParseError("'" + path + "' is not a WAVE file");
  }
  Waveform w;
  std::uint16_t channels = 0, bits = 0;
  bool got_fmt = false;
  while (f.read(tag, 4)) {
    const std::uint32_t size = read_u32(f);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      const std::uint16_t format = read_u16(f);
      channels = read_u16(f);
      w.sample_rate = static_cast<int>(read_u32(f));
      read_u32(f);
      read_u16(f);
      bits = read_u16(f);
      if (size > 16) f.seekg(size - 16, std::ios::cur);
      if (format != 1 || channels != 1 || bits != 16) {
        throw ParseError("'" + path + "': only 16-bit PCM mono supported");
      }
      got_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!got_fmt) throw ParseError("'" + path + "': data before fmt");
      const std::uint32_t count = size / 2;
      w.samples.resize(count);
      for (std::uint32_t i = 0; i < count; ++i) {
        std::int16_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 2);
        w.samples[i] = static_cast<double>(v) / 32767.0;
      }
      if (!f) throw ParseError("truncated WAV data in '" + path + "'");
      return w;
    } else {
      f.seekg(size + (size & 1), std::ios::cur);
    }
  }
  throw ParseError("'" + path + "' has no data chunk");
}

void mel_write(const std::string& path, const MelSpectrogram& m) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write("MEL1", 4);
  write_u32(f, static_cast<std::uint32_t>(m.frames));
  write_u32(f, static_cast<std::uint32_t>(m.n_mels));
  write_f32(f, static_cast<float>(m.frame_shift_ms));
  write_f32(f, static_cast<float>(m.frame_length_ms));
  write_u32(f, static_cast<std::uint32_t>(m.sample_rate));
  for (double v : m.data) write_f32(f, static_cast<float>(v));
  if (!f) throw IoError("short write to '" + path + "'");
}

MelSpectrogram mel_read(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "MEL1", 4) != 0) {
    throw ParseError("'" + path + "' is not a MEL1 file");
  }
  MelSpectrogram m;
  m.frames = read_u32(f);
  m.n_mels = read_u32(f);
  m.frame_shift_ms = read_f32(f);
  m.frame_length_ms = read_f32(f);
  m.sample_rate = static_cast<int>(read_u32(f));
  m.data.resize(m.frames * m.n_mels);
  for (auto& v : m.data) v = read_f32(f);
  if (!f) throw ParseError("truncated MEL1 file '" + path + "'");
  return m;
}

void pgm_write(const std::string& path, const MelSpectrogram& m) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  double lo = m.data.empty() ? 0.0 : m.data[0];
  double hi = lo;
  for (double v : m.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi - lo;
  f << "P5\n" << m.frames << " " << m.n_mels << "\n255\n";
  // Top image row = highest mel band; columns advance in time.
  for (std::int64_t band = m.n_mels - 1; band >= 0; --band) {
    for (std::int64_t t = 0; t < m.frames; ++t) {
      const double v = m.at(t, band);
      const int px =
          span > 0.0 ? static_cast<int>(std::lround((v - lo) / span * 255.0))
                     : 0;
      f.put(static_cast<char>(std::clamp(px, 0, 255)));
    }
  }
  if (!f) throw IoError("short write to '" + path + "'");
}

}  // namespace vstyle::audio
