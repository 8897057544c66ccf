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

#ifndef VSTYLE_MODEL_HPP_
#define VSTYLE_MODEL_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vstyle/audio.hpp"
#include "vstyle/corpus.hpp"
#include "vstyle/param_store.hpp"
#include "vstyle/rng.hpp"
#include "vstyle/tensor.hpp"

namespace vstyle::model {

// Network dimensions. Defaults are the desk-scale configuration used by the
// test and demo harnesses; paper() restores the published sizes.
struct ModelConfig {
  std::int64_t latent_dim = 32;
  std::int64_t mel_dim = audio::kNumMels;
  std::int64_t text_vocab = corpus::kVocabSize;
  std::int64_t text_embed_dim = 64;
  std::int64_t enc_conv_channels = 64;  // three width-5 conv layers
  std::int64_t enc_lstm_units = 64;     // total over both directions
  std::vector<std::int64_t> ref_conv_channels = {16, 16, 32, 32, 64, 64};
  std::int64_t ref_gru_units = 64;
  std::int64_t attn_dim = 32;
  std::int64_t attn_location_filters = 8;
  std::int64_t attn_location_kernel = 15;
  std::vector<std::int64_t> dec_prenet_dims = {64, 64};
  std::int64_t dec_lstm_units = 128;
  std::int64_t postnet_channels = 128;  // five width-5 conv layers
  double zoneout_prob = 0.1;
  double prenet_dropout = 0.5;
  // The network trains on (mel - log_floor) * mel_norm_scale so a zero
  // output frame coincides with silence.
  double mel_norm_scale = 0.25;

  static ModelConfig desk() { return {}; }
  static ModelConfig paper();
  // Uniform tiny dimensions for finite-difference sweeps.
  static ModelConfig miniature(std::int64_t latent, std::int64_t hidden);

  void validate() const;
};

// Reparameterized latent: z = mu + exp(log_sigma) * eps holds exactly.
struct LatentVariable {
  Tensor mu;         // 1 x latent_dim
  Tensor log_sigma;  // 1 x latent_dim
  Tensor z;          // 1 x latent_dim
  std::vector<double> eps;
};

struct EncoderStates {
  Tensor states;  // L x enc_lstm_units
  std::int64_t length = 0;
};

// Per-utterance decode products. Mel tensors live in the model's normalized
// domain; to_mel_spectrogram() maps back to log-mel.
struct DecoderOutput {
  Tensor mel_before;        // T x mel_dim
  Tensor mel_after;         // T x mel_dim; mel_before + postnet residual
  Tensor stop_logits;       // length T (or padded length, teacher-forced)
  std::vector<double> alignments;  // T x L attention weights, row-major
  std::int64_t align_rows = 0;
  std::int64_t align_cols = 0;
  bool truncated = false;
};

// ---- Mel normalization ------------------------------------------------------

double normalize_mel_value(const ModelConfig& cfg, double log_mel);
double denormalize_mel_value(const ModelConfig& cfg, double v);
// T x mel_dim constant tensor in the normalized domain.
Tensor mel_to_model_domain(const ModelConfig& cfg,
                           const audio::MelSpectrogram& m);
audio::MelSpectrogram model_domain_to_mel(const ModelConfig& cfg,
                                          const Tensor& frames);

// ---- Parameters -------------------------------------------------------------

// Creates every weight in a fixed order; deterministic given the seed.
ParameterStore init_parameters(const ModelConfig& cfg, std::uint64_t seed);

// ---- Network pieces ---------------------------------------------------------

// Six stride-2 3x3 convolutions over the T x mel map followed by a GRU along
// time; returns the final GRU state (1 x ref_gru_units), length-independent.
Tensor reference_encode(const audio::MelSpectrogram& x, const ModelConfig& cfg,
                        ParameterStore& params);

// Linear mu / log-sigma heads plus the reparameterization z = mu + sigma*eps.
LatentVariable latent_heads(const Tensor& ref_embedding, const ModelConfig& cfg,
                            ParameterStore& params,
                            std::span<const double> eps);

// Embedding -> three width-5 convolutions -> bidirectional LSTM (zoneout at
// train time only).
EncoderStates text_encode(std::span<const std::int64_t> text_ids,
                          const ModelConfig& cfg, ParameterStore& params,
                          bool training = false, Rng* rng = nullptr);

// Adds a linear projection of z to every encoder state.
EncoderStates condition(const EncoderStates& enc, const Tensor& z,
                        const ModelConfig& cfg, ParameterStore& params);

// Zoneout mixing: each unit keeps its previous state with probability p.
// p = 0 passes `next` through unchanged; p = 1 freezes the state at `prev`.
Tensor zoneout_mix(const Tensor& prev, const Tensor& next, double p, Rng& rng);

struct AttendResult {
  Tensor context;  // 1 x enc_lstm_units
  Tensor weights;  // length L
};

// Location-sensitive attention: energies from the query, the encoder states
// and convolution features of [prev_weights; cum_weights].
AttendResult attend(const Tensor& query, const EncoderStates& enc,
                    const Tensor& prev_weights, const Tensor& cum_weights,
                    const ModelConfig& cfg, ParameterStore& params);

struct DecoderState {
  Tensor h1, c1, h2, c2;  // batch x dec_lstm_units each
};

DecoderState decoder_init(const ModelConfig& cfg, std::int64_t batch);

struct DecodeStepResult {
  Tensor frame;       // batch x mel_dim
  Tensor stop_logit;  // batch x 1
  DecoderState state;
};

// Prenet on the previous frame, two LSTM layers with the context vector
// concatenated, then linear frame and stop projections. Prenet dropout is
// live only when `training`.
DecodeStepResult decode_step(const Tensor& prev_frame, const Tensor& context,
                             const DecoderState& state, const ModelConfig& cfg,
                             ParameterStore& params, bool training = false,
                             Rng* rng = nullptr);

// postnet residual over a T x mel_dim sequence.
Tensor postnet(const Tensor& frames, const ModelConfig& cfg,
               ParameterStore& params);

struct ForwardResult {
  std::vector<DecoderOutput> outputs;
  std::vector<LatentVariable> latents;
};

// Full teacher-forced pass: recognition on each item's ground-truth mel,
// conditioning, synchronized batched decoding over the padded length, then
// per-item postnet. eps_override, when given, pins each item's latent draw
// (finite-difference checks need a frozen forward).
ForwardResult forward_teacher_forced(
    const corpus::Batch& batch, const ModelConfig& cfg, ParameterStore& params,
    Rng& rng, bool training,
    const std::vector<std::vector<double>>* eps_override = nullptr);

// Free-running decode from a zero initial frame; stops once
// sigmoid(stop_logit) > 0.5 or at max_frames (sets `truncated`). Runs without
// graph recording.
DecoderOutput forward_inference(std::span<const std::int64_t> text_ids,
                                std::span<const double> z,
                                const ModelConfig& cfg, ParameterStore& params,
                                std::int64_t max_frames);

// ---- Checkpoints ------------------------------------------------------------

struct Checkpoint {
  ModelConfig cfg;
  ParameterStore params;
  std::int64_t step = 0;
  std::uint64_t seed = 0;
};

// Directory with params.vstp, config.txt and state.txt (step, seed, and the
// config hash the loader verifies).
void save_checkpoint(const std::string& dir, const ModelConfig& cfg,
                     const ParameterStore& params, std::int64_t step,
                     std::uint64_t seed);
Checkpoint load_checkpoint(const std::string& dir);

}  // namespace vstyle::model

#endif  // VSTYLE_MODEL_HPP_
