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

#ifndef VSTYLE_AUDIO_IO_HPP_
#define VSTYLE_AUDIO_IO_HPP_

#include <string>

#include "vstyle/audio.hpp"

namespace vstyle::audio {

// 16-bit PCM mono WAV.
void wav_write(const std::string& path, const Waveform& w);
Waveform wav_read(const std::string& path);

// MEL1 spectrogram container: magic "MEL1", u32 frames, u32 n_mels,
// f32 frame_shift_ms, f32 frame_length_ms, u32 sample_rate, then row-major
// little-endian f32 payload. Round trips are bit-exact.
void mel_write(const std::string& path, const MelSpectrogram& m);
MelSpectrogram mel_read(const std::string& path);

// 8-bit binary PGM, min-max normalized per file; time on the x-axis with the
// highest band on the top row.
void pgm_write(const std::string& path, const MelSpectrogram& m);

}  // namespace vstyle::audio

#endif  // VSTYLE_AUDIO_IO_HPP_
