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

#include "vstyle/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "vstyle/audio_io.hpp"
#include "vstyle/error.hpp"

namespace vstyle::corpus {

namespace fs = std::filesystem;

namespace {

// Hump geometry in mel bands.
constexpr double kHumpSigma = 3.0;
constexpr double kHumpHeight = 10.0;     // log-domain height at energy = 1
constexpr double kHarmonicOffset = 8.0;  // secondary hump above the main one
constexpr double kHarmonicWeight = 0.4;
constexpr double kCenterBase = 16.0;  // pitch_base 0 -> band 16, 1 -> band 56
constexpr double kCenterSpan = 40.0;
constexpr double kVibratoDepth = 3.0;   // bands at pitch_var = 1
constexpr double kVibratoPeriod = 12.0;  // frames

double gauss(double d) {
  return std::exp(-d * d / (2.0 * kHumpSigma * kHumpSigma));
}

// Per-token amplitude factor in [0.7, 1.3] so text content is visible in the
// spectrogram. The end marker is silent: every utterance closes with a rest,
// which is what the decoder's stop head keys on.
double token_amplitude(std::int64_t tok) {
  if (tok == kEndId) return 0.0;
  return 0.7 + 0.6 * static_cast<double>(tok % 13) / 12.0;
}

// Small per-token center shift (+-1.5 bands); enough that hump placement
// needs the text, small against the vibrato and pitch_base spans.
double token_offset(std::int64_t tok) {
  return (static_cast<double>(tok % 13) - 6.0) / 4.0;
}

void check_style(const StyleParams& s) {
  for (double v : {s.pitch_base, s.pitch_var, s.rate, s.energy}) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ContractError("style parameter " + std::to_string(v) +
                          " outside [0, 1]");
    }
  }
}

char token_to_char(std::int64_t id) {
  if (id >= 0 && id < 26) return static_cast<char>('a' + id);
  switch (id) {
    case kSpaceId: return ' ';
    case kPeriodId: return '.';
    case kCommaId: return ',';
    case kEndId: return '$';
    default:
      throw ContractError("token id " + std::to_string(id) +
                          " outside alphabet");
  }
}

std::int64_t char_to_token(char c) {
  if (c >= 'a' && c <= 'z') return c - 'a';
  switch (c) {
    case ' ': return kSpaceId;
    case '.': return kPeriodId;
    case ',': return kCommaId;
    case '$': return kEndId;
    default:
      throw ParseError(std::string("character '") + c +
                       "' outside the corpus alphabet");
  }
}

}  // namespace

std::string tokens_to_text(const std::vector<std::int64_t>& ids) {
  std::string out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(token_to_char(id));
  return out;
}

std::vector<std::int64_t> text_to_tokens(const std::string& text) {
  std::vector<std::int64_t> out;
  out.reserve(text.size());
  for (char c : text) out.push_back(char_to_token(c));
  return out;
}

std::int64_t frames_per_token(double rate) {
  return static_cast<std::int64_t>(std::lround(16.0 - 12.0 * rate));
}

Utterance gen_utterance(Rng rng, const StyleParams& style) {
  check_style(style);
  Utterance u;
  u.style = style;

  const std::int64_t body = 3 + static_cast<std::int64_t>(rng.uniform_int(18));
  for (std::int64_t i = 0; i < body; ++i) {
    u.text.push_back(static_cast<std::int64_t>(rng.uniform_int(kEndId)));
  }
  u.text.push_back(kEndId);

  const std::int64_t fpt = frames_per_token(style.rate);
  const std::int64_t len = static_cast<std::int64_t>(u.text.size());
  const std::int64_t frames = fpt * len;
  const double phase = rng.uniform(0.0, 2.0 * M_PI);
  const double floor_v = audio::log_floor();

  u.mel = audio::make_mel(frames, audio::kNumMels, floor_v);
  if (style.energy > 0.0) {
    for (std::int64_t f = 0; f < frames; ++f) {
      const std::int64_t tok = u.text[f / fpt];
      const double height = kHumpHeight * style.energy * token_amplitude(tok);
      if (height <= 0.0) continue;  // the end-marker rest stays at the floor
      const double center =
          kCenterBase + kCenterSpan * style.pitch_base + token_offset(tok) +
          kVibratoDepth * style.pitch_var *
              std::sin(2.0 * M_PI * static_cast<double>(f) / kVibratoPeriod +
                       phase);
      for (std::int64_t b = 0; b < audio::kNumMels; ++b) {
        const double d = static_cast<double>(b) - center;
        const double bump =
            gauss(d) + kHarmonicWeight * gauss(d - kHarmonicOffset);
        // Quantize through f32 so corpus serialization round trips bit-exact.
        u.mel.at(f, b) = static_cast<double>(
            static_cast<float>(floor_v + height * bump));
      }
    }
  }
  return u;
}

std::vector<Utterance> gen_corpus(Rng rng, std::int64_t n) {
  if (n < 1) throw ContractError("gen_corpus requires n >= 1");
  const std::int64_t test_count = std::max<std::int64_t>(1, n / 5);
  std::vector<Utterance> out;
  out.reserve(n);
  for (std::int64_t i = 0; i < n; ++i) {
    Rng item_rng = rng.split(static_cast<std::uint64_t>(i));
    StyleParams style;
    style.pitch_base = item_rng.uniform();
    style.pitch_var = item_rng.uniform();
    style.rate = item_rng.uniform();
    style.energy = item_rng.uniform();
    Utterance u = gen_utterance(item_rng, style);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "utt_%05lld",
                  static_cast<long long>(i));
    u.id = buf;
    u.split = i < n - test_count ? "train" : "test";
    out.push_back(std::move(u));
  }
  return out;
}

Batch make_batch(const std::vector<const Utterance*>& utts,
                 std::int64_t extra_pad) {
  if (utts.empty()) throw ContractError("empty batch");
  Batch b;
  b.batch = static_cast<std::int64_t>(utts.size());
  for (const auto* u : utts) {
    b.l_max = std::max(b.l_max, static_cast<std::int64_t>(u->text.size()));
    b.t_max = std::max(b.t_max, u->mel.frames);
  }
  b.t_max += extra_pad;
  const double floor_v = audio::log_floor();
  b.text_ids.assign(b.batch * b.l_max, 0);
  b.mels.assign(b.batch * b.t_max * b.n_mels, floor_v);
  b.stop_targets.assign(b.batch * b.t_max, 0.0);
  for (std::int64_t i = 0; i < b.batch; ++i) {
    const Utterance& u = *utts[i];
    b.ids.push_back(u.id);
    b.text_lengths.push_back(static_cast<std::int64_t>(u.text.size()));
    b.mel_lengths.push_back(u.mel.frames);
    std::copy(u.text.begin(), u.text.end(),
              b.text_ids.begin() + i * b.l_max);
    std::copy(u.mel.data.begin(), u.mel.data.end(),
              b.mels.begin() + i * b.t_max * b.n_mels);
    for (std::int64_t t = u.mel.frames - 1; t < b.t_max; ++t) {
      b.stop_targets[i * b.t_max + t] = 1.0;
    }
  }
  return b;
}

std::vector<Batch> make_batches(const std::vector<Utterance>& utts,
                                std::int64_t batch_size, Rng rng,
                                std::int64_t extra_pad) {
  if (utts.empty()) throw ContractError("make_batches on an empty corpus");
  if (batch_size < 1) throw ContractError("batch_size must be >= 1");
  std::vector<std::int64_t> order(utts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::int64_t a, std::int64_t z) {
                     return utts[a].mel.frames > utts[z].mel.frames;
                   });
  std::vector<std::vector<const Utterance*>> chunks;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    std::vector<const Utterance*> chunk;
    for (std::size_t j = i; j < std::min(order.size(), i + batch_size); ++j) {
      chunk.push_back(&utts[order[j]]);
    }
    chunks.push_back(std::move(chunk));
  }
  // Fisher-Yates over bucket order.
  for (std::size_t i = chunks.size(); i > 1; --i) {
    const auto j = rng.uniform_int(i);
    std::swap(chunks[i - 1], chunks[j]);
  }
  std::vector<Batch> out;
  out.reserve(chunks.size());
  for (const auto& chunk : chunks) out.push_back(make_batch(chunk, extra_pad));
  return out;
}

void save_corpus(const std::string& dir, const std::vector<Utterance>& utts) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "'");
  for (const auto& u : utts) {
    audio::mel_write((fs::path(dir) / (u.id + ".mel")).string(), u.mel);
  }
  // Manifest last: its presence marks a complete corpus.
  std::ostringstream body;
  body << "id\tsplit\ttext\tpitch_base\tpitch_var\trate\tenergy\n";
  char num[4][32];
  for (const auto& u : utts) {
    std::snprintf(num[0], 32, "%.17g", u.style.pitch_base);
    std::snprintf(num[1], 32, "%.17g", u.style.pitch_var);
    std::snprintf(num[2], 32, "%.17g", u.style.rate);
    std::snprintf(num[3], 32, "%.17g", u.style.energy);
    body << u.id << '\t' << u.split << '\t' << tokens_to_text(u.text) << '\t'
         << num[0] << '\t' << num[1] << '\t' << num[2] << '\t' << num[3]
         << '\n';
  }
  std::ofstream f((fs::path(dir) / "manifest.tsv").string(),
                  std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write manifest in '" + dir + "'");
  f << body.str();
  if (!f) throw IoError("short write of manifest in '" + dir + "'");
}

std::vector<Utterance> load_corpus(const std::string& dir) {
  const auto manifest = (fs::path(dir) / "manifest.tsv").string();
  std::ifstream f(manifest);
  if (!f) throw IoError("cannot open '" + manifest + "'");
  std::string line;
  if (!std::getline(f, line)) {
    throw ParseError(manifest + ":1: empty manifest");
  }
  std::vector<Utterance> out;
  std::int64_t lineno = 1;
  while (std::getline(f, line)) {
    lineno += 1;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 7) {
      throw ParseError(manifest + ":" + std::to_string(lineno) +
                       ": expected 7 columns, got " +
                       std::to_string(cols.size()));
    }
    Utterance u;
    u.id = cols[0];
    u.split = cols[1];
    u.text = text_to_tokens(cols[2]);
    u.style.pitch_base = std::stod(cols[3]);
    u.style.pitch_var = std::stod(cols[4]);
    u.style.rate = std::stod(cols[5]);
    u.style.energy = std::stod(cols[6]);
    u.mel = audio::mel_read((fs::path(dir) / (u.id + ".mel")).string());
    out.push_back(std::move(u));
  }
  return out;
}

}  // namespace vstyle::corpus
