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

#include <benchmark/benchmark.h>

#include "vstyle/audio.hpp"
#include "vstyle/corpus.hpp"
#include "vstyle/model.hpp"
#include "vstyle/training.hpp"

using namespace vstyle;

namespace {

corpus::Batch bench_batch(std::int64_t items) {
  static std::vector<corpus::Utterance> utts;
  utts.clear();
  Rng rng(1);
  for (std::int64_t i = 0; i < items; ++i) {
    corpus::StyleParams style{.pitch_base = 0.5, .pitch_var = 0.5,
                              .rate = 0.5, .energy = 0.5};
    utts.push_back(corpus::gen_utterance(rng.split(i), style));
  }
  std::vector<const corpus::Utterance*> ptrs;
  for (const auto& u : utts) ptrs.push_back(&u);
  return corpus::make_batch(ptrs, 4);
}

void BM_MatmulDecoderShape(benchmark::State& state) {
  Rng rng(2);
  Tensor a = Tensor::from({8, 256}, rng.normal_vec(8 * 256));
  Tensor b = Tensor::from({256, 512}, rng.normal_vec(256 * 512));
  for (auto _ : state) {
    benchmark::DoNotOptimize(matmul(a, b));
  }
}
BENCHMARK(BM_MatmulDecoderShape);

void BM_TrainStep(benchmark::State& state) {
  training::TrainConfig cfg;
  cfg.batch_size = state.range(0);
  cfg.seed = 3;
  training::TrainState st = training::init_train_state(cfg);
  corpus::Batch batch = bench_batch(state.range(0));
  for (auto _ : state) {
    training::train_step(st, batch, cfg);
  }
}
BENCHMARK(BM_TrainStep)->Arg(2)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_TeacherForcedForward(benchmark::State& state) {
  model::ModelConfig cfg;
  ParameterStore params = model::init_parameters(cfg, 4);
  corpus::Batch batch = bench_batch(4);
  for (auto _ : state) {
    Rng rng(5);
    benchmark::DoNotOptimize(
        model::forward_teacher_forced(batch, cfg, params, rng, false));
  }
}
BENCHMARK(BM_TeacherForcedForward)->Unit(benchmark::kMillisecond);

void BM_Inference(benchmark::State& state) {
  model::ModelConfig cfg;
  ParameterStore params = model::init_parameters(cfg, 6);
  std::vector<std::int64_t> text{7, 4, 11, 0, 26, 3, corpus::kEndId};
  std::vector<double> z(cfg.latent_dim, 0.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        model::forward_inference(text, z, cfg, params, 120));
  }
}
BENCHMARK(BM_Inference)->Unit(benchmark::kMillisecond);

void BM_MelExtract(benchmark::State& state) {
  Rng rng(7);
  audio::Waveform w;
  w.samples.resize(16000);
  for (auto& s : w.samples) s = rng.uniform(-0.5, 0.5);
  const auto fb = audio::make_mel_filterbank();
  for (auto _ : state) {
    benchmark::DoNotOptimize(audio::mel_extract(w, fb));
  }
}
BENCHMARK(BM_MelExtract)->Unit(benchmark::kMillisecond);

void BM_GriffinLim(benchmark::State& state) {
  Rng rng(8);
  audio::Waveform w;
  w.samples.resize(8000);
  for (auto& s : w.samples) s = rng.uniform(-0.5, 0.5);
  const auto spec = audio::stft(w);
  const auto mag = audio::magnitudes(spec);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        audio::griffin_lim(mag, spec.frames, audio::kNfft, 10));
  }
}
BENCHMARK(BM_GriffinLim)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
