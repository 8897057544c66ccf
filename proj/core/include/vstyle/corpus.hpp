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

#ifndef VSTYLE_CORPUS_HPP_
#define VSTYLE_CORPUS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "vstyle/audio.hpp"
#include "vstyle/rng.hpp"

namespace vstyle::corpus {

// Token alphabet: 'a'..'z', space, period, comma, end marker.
inline constexpr std::int64_t kVocabSize = 30;
inline constexpr std::int64_t kSpaceId = 26;
inline constexpr std::int64_t kPeriodId = 27;
inline constexpr std::int64_t kCommaId = 28;
inline constexpr std::int64_t kEndId = 29;

std::string tokens_to_text(const std::vector<std::int64_t>& ids);
std::vector<std::int64_t> text_to_tokens(const std::string& text);

// Ground-truth generative factors, each normalized to [0, 1]. These label the
// synthetic data so latent-space probes have something objective to correlate
// against.
struct StyleParams {
  double pitch_base = 0.5;  // center band of the spectral hump
  double pitch_var = 0.5;   // vibrato depth of the hump center
  double rate = 0.5;        // speaking rate; rate 1 -> 4 frames per token
  double energy = 0.5;      // hump height above the log floor
};

struct Utterance {
  std::string id;
  std::string split;  // "train" or "test"
  std::vector<std::int64_t> text;
  audio::MelSpectrogram mel;
  StyleParams style;
};

// frames-per-token for a rate in [0, 1]: linear 16 -> 4.
std::int64_t frames_per_token(double rate);

// Deterministic synthetic utterance: text of 3-20 alphabet tokens plus the
// end marker, and a mel built directly in the log-mel domain as per-token
// harmonic humps. pitch_base sets the hump center band, pitch_var the
// frame-to-frame vibrato of that center, rate the frames per token and
// energy the hump height. Identical (rng, style) inputs give bit-identical
// utterances.
Utterance gen_utterance(Rng rng, const StyleParams& style);

// n utterances with styles uniform on [0,1]^4 and a deterministic 80/20
// train/test split (test gets max(1, n/5) items).
std::vector<Utterance> gen_corpus(Rng rng, std::int64_t n);

// Teacher-forcing batch, length-bucketed and padded. Mel padding holds the
// log floor; stop_targets[i][t] = 1 iff t >= mel_lengths[i] - 1.
struct Batch {
  std::int64_t batch = 0;
  std::int64_t l_max = 0;
  std::int64_t t_max = 0;
  std::int64_t n_mels = audio::kNumMels;
  std::vector<std::int64_t> text_ids;      // batch x l_max, zero padded
  std::vector<std::int64_t> text_lengths;  // batch
  std::vector<double> mels;                // batch x t_max x n_mels
  std::vector<std::int64_t> mel_lengths;   // batch
  std::vector<double> stop_targets;        // batch x t_max
  std::vector<std::string> ids;

  double mel_at(std::int64_t i, std::int64_t t, std::int64_t m) const {
    return mels[(i * t_max + t) * n_mels + m];
  }
};

Batch make_batch(const std::vector<const Utterance*>& utts,
                 std::int64_t extra_pad);

// Length-bucketed batches in rng-shuffled order. extra_pad appends that many
// padding frames past the longest item so every item sees positive stop
// targets beyond its final frame.
std::vector<Batch> make_batches(const std::vector<Utterance>& utts,
                                std::int64_t batch_size, Rng rng,
                                std::int64_t extra_pad = 4);

// Directory layout: one MEL1 file per utterance plus manifest.tsv
// (id, split, text, four style fields); the manifest is written last.
void save_corpus(const std::string& dir, const std::vector<Utterance>& utts);
std::vector<Utterance> load_corpus(const std::string& dir);

}  // namespace vstyle::corpus

#endif  // VSTYLE_CORPUS_HPP_
