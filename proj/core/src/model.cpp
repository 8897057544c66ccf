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

#include "vstyle/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "vstyle/config.hpp"

namespace vstyle::model {

namespace fs = std::filesystem;

ModelConfig ModelConfig::paper() {
  ModelConfig cfg;
  cfg.latent_dim = 32;
  cfg.text_embed_dim = 512;
  cfg.enc_conv_channels = 512;
  cfg.enc_lstm_units = 512;
  cfg.ref_conv_channels = {32, 32, 64, 64, 128, 128};
  cfg.ref_gru_units = 128;
  cfg.attn_dim = 128;
  cfg.attn_location_filters = 32;
  cfg.attn_location_kernel = 31;
  cfg.dec_prenet_dims = {256, 256};
  cfg.dec_lstm_units = 1024;
  cfg.postnet_channels = 512;
  return cfg;
}

ModelConfig ModelConfig::miniature(std::int64_t latent, std::int64_t hidden) {
  ModelConfig cfg;
  cfg.latent_dim = latent;
  cfg.text_embed_dim = hidden;
  cfg.enc_conv_channels = hidden;
  cfg.enc_lstm_units = hidden;
  cfg.ref_conv_channels.assign(6, hidden);
  cfg.ref_gru_units = hidden;
  cfg.attn_dim = hidden;
  cfg.attn_location_filters = 4;
  cfg.attn_location_kernel = 7;
  cfg.dec_prenet_dims = {hidden, hidden};
  cfg.dec_lstm_units = hidden;
  cfg.postnet_channels = hidden;
  return cfg;
}

void ModelConfig::validate() const {
  auto positive = [](std::int64_t v, const char* name) {
    if (v < 1) {
      throw ConfigError(std::string(name) + " must be positive, got " +
                        std::to_string(v));
    }
  };
  positive(latent_dim, "latent_dim");
  positive(mel_dim, "mel_dim");
  positive(text_vocab, "text_vocab");
  positive(text_embed_dim, "text_embed_dim");
  positive(enc_conv_channels, "enc_conv_channels");
  positive(enc_lstm_units, "enc_lstm_units");
  positive(ref_gru_units, "ref_gru_units");
  positive(attn_dim, "attn_dim");
  positive(attn_location_filters, "attn_location_filters");
  positive(attn_location_kernel, "attn_location_kernel");
  positive(dec_lstm_units, "dec_lstm_units");
  positive(postnet_channels, "postnet_channels");
  if (ref_conv_channels.size() != 6) {
    throw ConfigError("ref_conv_channels must list 6 layers");
  }
  for (auto c : ref_conv_channels) positive(c, "ref_conv_channels entry");
  if (dec_prenet_dims.empty()) {
    throw ConfigError("dec_prenet_dims must not be empty");
  }
  for (auto d : dec_prenet_dims) positive(d, "dec_prenet_dims entry");
  if (enc_lstm_units % 2 != 0) {
    throw ConfigError("enc_lstm_units must be even (bidirectional)");
  }
  if (attn_location_kernel % 2 != 1) {
    throw ConfigError("attn_location_kernel must be odd");
  }
  if (!(zoneout_prob >= 0.0 && zoneout_prob < 1.0)) {
    throw ConfigError("zoneout_prob must lie in [0, 1)");
  }
  if (!(prenet_dropout >= 0.0 && prenet_dropout < 1.0)) {
    throw ConfigError("prenet_dropout must lie in [0, 1)");
  }
  if (!(mel_norm_scale > 0.0)) {
    throw ConfigError("mel_norm_scale must be positive");
  }
}

// ---- Mel normalization ------------------------------------------------------

double normalize_mel_value(const ModelConfig& cfg, double log_mel) {
  return (log_mel - audio::log_floor()) * cfg.mel_norm_scale;
}

double denormalize_mel_value(const ModelConfig& cfg, double v) {
  return v / cfg.mel_norm_scale + audio::log_floor();
}

Tensor mel_to_model_domain(const ModelConfig& cfg,
                           const audio::MelSpectrogram& m) {
  std::vector<double> data(m.data.size());
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    data[i] = normalize_mel_value(cfg, m.data[i]);
  }
  return Tensor::from({m.frames, m.n_mels}, std::move(data));
}

audio::MelSpectrogram model_domain_to_mel(const ModelConfig& cfg,
                                          const Tensor& frames) {
  audio::MelSpectrogram m = audio::make_mel(frames.rows(), frames.cols(), 0.0);
  const double floor_v = audio::log_floor();
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    // The network output is unconstrained; clamp back to the mel floor.
    m.data[i] = std::max(denormalize_mel_value(cfg, frames.values()[i]),
                         floor_v);
  }
  return m;
}

// ---- Parameters -------------------------------------------------------------

namespace {

// Spatial extent of the reference-encoder feature map after the six
// stride-2 convolutions.
std::int64_t halved6(std::int64_t v) {
  for (int i = 0; i < 6; ++i) v = (v + 1) / 2;
  return v;
}

void create_weight(ParameterStore& store, Rng& rng, const std::string& name,
                   std::int64_t fan_in, std::int64_t fan_out) {
  Rng stream = rng.split(store.entry_names().size() + 1);
  store.create(name, {fan_in, fan_out},
               glorot_uniform(fan_in, fan_out, fan_in * fan_out, stream));
}

void create_bias(ParameterStore& store, const std::string& name,
                 std::int64_t n) {
  store.create_zeros(name, {n});
}

void create_lstm(ParameterStore& store, Rng& rng, const std::string& prefix,
                 std::int64_t input, std::int64_t hidden) {
  create_weight(store, rng, prefix + ".w", input + hidden, 4 * hidden);
  auto& b = store.create_zeros(prefix + ".b", {4 * hidden});
  // Forget-gate bias starts at one.
  auto& bv = b.mutable_values();
  std::fill(bv.begin() + hidden, bv.begin() + 2 * hidden, 1.0);
}

}  // namespace

ParameterStore init_parameters(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParameterStore store(seed);
  Rng rng(seed);

  create_weight(store, rng, "embed", cfg.text_vocab, cfg.text_embed_dim);

  std::int64_t in = cfg.text_embed_dim;
  for (int l = 1; l <= 3; ++l) {
    const std::string p = "enc_conv" + std::to_string(l);
    create_weight(store, rng, p + ".w", 5 * in, cfg.enc_conv_channels);
    create_bias(store, p + ".b", cfg.enc_conv_channels);
    in = cfg.enc_conv_channels;
  }
  const std::int64_t h2 = cfg.enc_lstm_units / 2;
  create_lstm(store, rng, "enc_lstm_fwd", cfg.enc_conv_channels, h2);
  create_lstm(store, rng, "enc_lstm_bwd", cfg.enc_conv_channels, h2);

  in = 1;
  for (int l = 1; l <= 6; ++l) {
    const std::string p = "ref_conv" + std::to_string(l);
    const std::int64_t out = cfg.ref_conv_channels[l - 1];
    create_weight(store, rng, p + ".w", 9 * in, out);
    create_bias(store, p + ".b", out);
    in = out;
  }
  const std::int64_t gru_in = cfg.ref_conv_channels.back() * halved6(cfg.mel_dim);
  const std::int64_t r = cfg.ref_gru_units;
  create_weight(store, rng, "ref_gru.rz.w", gru_in + r, 2 * r);
  create_bias(store, "ref_gru.rz.b", 2 * r);
  create_weight(store, rng, "ref_gru.cand.w", gru_in + r, r);
  create_bias(store, "ref_gru.cand.b", r);

  create_weight(store, rng, "latent_mu.w", r, cfg.latent_dim);
  create_bias(store, "latent_mu.b", cfg.latent_dim);
  create_weight(store, rng, "latent_logsig.w", r, cfg.latent_dim);
  create_bias(store, "latent_logsig.b", cfg.latent_dim);

  create_weight(store, rng, "cond.w", cfg.latent_dim, cfg.enc_lstm_units);
  create_bias(store, "cond.b", cfg.enc_lstm_units);

  const std::int64_t h = cfg.dec_lstm_units;
  const std::int64_t d = cfg.enc_lstm_units;
  const std::int64_t a = cfg.attn_dim;
  create_weight(store, rng, "attn_query.w", h, a);
  create_weight(store, rng, "attn_memory.w", d, a);
  create_weight(store, rng, "attn_loc_conv.w", cfg.attn_location_kernel * 2,
                cfg.attn_location_filters);
  create_weight(store, rng, "attn_loc_proj.w", cfg.attn_location_filters, a);
  create_bias(store, "attn.b", a);
  create_weight(store, rng, "attn_score.v", a, 1);

  in = cfg.mel_dim;
  for (std::size_t l = 0; l < cfg.dec_prenet_dims.size(); ++l) {
    const std::string p = "prenet" + std::to_string(l + 1);
    create_weight(store, rng, p + ".w", in, cfg.dec_prenet_dims[l]);
    create_bias(store, p + ".b", cfg.dec_prenet_dims[l]);
    in = cfg.dec_prenet_dims[l];
  }
  create_lstm(store, rng, "dec_lstm1", in + d, h);
  create_lstm(store, rng, "dec_lstm2", h + d, h);
  create_weight(store, rng, "proj_mel.w", h + d, cfg.mel_dim);
  create_bias(store, "proj_mel.b", cfg.mel_dim);
  create_weight(store, rng, "proj_stop.w", h + d, 1);
  create_bias(store, "proj_stop.b", 1);

  in = cfg.mel_dim;
  for (int l = 1; l <= 5; ++l) {
    const std::string p = "postnet" + std::to_string(l);
    const std::int64_t out = l == 5 ? cfg.mel_dim : cfg.postnet_channels;
    create_weight(store, rng, p + ".w", 5 * in, out);
    create_bias(store, p + ".b", out);
    in = out;
  }
  return store;
}

// ---- Recurrent cells --------------------------------------------------------

namespace {

struct LstmOut {
  Tensor h, c;
};

LstmOut lstm_step(ParameterStore& params, const std::string& prefix,
                  const Tensor& x, const Tensor& h, const Tensor& c,
                  std::int64_t units) {
  std::array<Tensor, 2> xh{x, h};
  Tensor gates =
      linear(concat_cols(xh), params.get(prefix + ".w"),
             params.get(prefix + ".b"));
  Tensor i = sigmoid(slice_cols(gates, 0, units));
  Tensor f = sigmoid(slice_cols(gates, units, units));
  Tensor g = tanh_op(slice_cols(gates, 2 * units, units));
  Tensor o = sigmoid(slice_cols(gates, 3 * units, units));
  Tensor c_new = add(mul(f, c), mul(i, g));
  Tensor h_new = mul(o, tanh_op(c_new));
  return {h_new, c_new};
}

Tensor gru_step(ParameterStore& params, const Tensor& x, const Tensor& h,
                std::int64_t units) {
  std::array<Tensor, 2> xh{x, h};
  Tensor rz = sigmoid(linear(concat_cols(xh), params.get("ref_gru.rz.w"),
                             params.get("ref_gru.rz.b")));
  Tensor r = slice_cols(rz, 0, units);
  Tensor u = slice_cols(rz, units, units);
  std::array<Tensor, 2> xrh{x, mul(r, h)};
  Tensor cand = tanh_op(linear(concat_cols(xrh), params.get("ref_gru.cand.w"),
                               params.get("ref_gru.cand.b")));
  Tensor one_minus_u = add_const(scale(u, -1.0), 1.0);
  return add(mul(u, h), mul(one_minus_u, cand));
}

}  // namespace

// ---- Recognition path -------------------------------------------------------

Tensor reference_encode(const audio::MelSpectrogram& x, const ModelConfig& cfg,
                        ParameterStore& params) {
  if (x.frames < 1) {
    throw ContractError("reference_encode requires at least one frame");
  }
  if (x.n_mels != cfg.mel_dim) {
    throw ContractError("reference mel has " + std::to_string(x.n_mels) +
                        " bands, model expects " + std::to_string(cfg.mel_dim));
  }
  // (T x mel) map as a single-channel (h*w, 1) image.
  Tensor feat = reshape(mel_to_model_domain(cfg, x), {x.frames * cfg.mel_dim, 1});
  std::int64_t h = x.frames, w = cfg.mel_dim;
  for (int l = 1; l <= 6; ++l) {
    const std::string p = "ref_conv" + std::to_string(l);
    feat = relu(conv2d_3x3_s2(feat, h, w, params.get(p + ".w"),
                              params.get(p + ".b")));
    h = (h + 1) / 2;
    w = (w + 1) / 2;
  }
  // GRU along the time axis of the (h x w x C) map.
  const std::int64_t c = cfg.ref_conv_channels.back();
  Tensor state = Tensor::zeros({1, cfg.ref_gru_units});
  for (std::int64_t t = 0; t < h; ++t) {
    Tensor xt = reshape(slice_rows(feat, t * w, w), {1, w * c});
    state = gru_step(params, xt, state, cfg.ref_gru_units);
  }
  return state;
}

LatentVariable latent_heads(const Tensor& ref_embedding, const ModelConfig& cfg,
                            ParameterStore& params,
                            std::span<const double> eps) {
  if (static_cast<std::int64_t>(eps.size()) != cfg.latent_dim) {
    throw ContractError("eps length " + std::to_string(eps.size()) +
                        " != latent_dim " + std::to_string(cfg.latent_dim));
  }
  LatentVariable lat;
  lat.eps.assign(eps.begin(), eps.end());
  lat.mu = linear(ref_embedding, params.get("latent_mu.w"),
                  params.get("latent_mu.b"));
  lat.log_sigma = linear(ref_embedding, params.get("latent_logsig.w"),
                         params.get("latent_logsig.b"));
  Tensor eps_t = Tensor::from({1, cfg.latent_dim}, lat.eps);
  lat.z = add(lat.mu, mul(exp_op(lat.log_sigma), eps_t));
  return lat;
}

// ---- Text path --------------------------------------------------------------

EncoderStates text_encode(std::span<const std::int64_t> text_ids,
                          const ModelConfig& cfg, ParameterStore& params,
                          bool training, Rng* rng) {
  if (text_ids.empty()) {
    throw ContractError("text_encode requires a non-empty token sequence");
  }
  for (auto id : text_ids) {
    if (id < 0 || id >= cfg.text_vocab) {
      throw VocabError("token id " + std::to_string(id) +
                       " outside vocabulary of " +
                       std::to_string(cfg.text_vocab));
    }
  }
  const bool zone = training && cfg.zoneout_prob > 0.0;
  if (zone && rng == nullptr) {
    throw ContractError("text_encode needs an rng when zoneout is active");
  }
  const std::int64_t l = static_cast<std::int64_t>(text_ids.size());
  Tensor x = gather_rows(params.get("embed"), text_ids);
  for (int layer = 1; layer <= 3; ++layer) {
    const std::string p = "enc_conv" + std::to_string(layer);
    x = relu(conv1d_same(x, params.get(p + ".w"), params.get(p + ".b"), 5));
  }
  const std::int64_t h2 = cfg.enc_lstm_units / 2;
  auto run_direction = [&](const std::string& prefix, bool reverse) {
    std::vector<Tensor> states(l);
    Tensor h = Tensor::zeros({1, h2});
    Tensor c = Tensor::zeros({1, h2});
    for (std::int64_t step = 0; step < l; ++step) {
      const std::int64_t t = reverse ? l - 1 - step : step;
      Tensor xt = slice_rows(x, t, 1);
      LstmOut out = lstm_step(params, prefix, xt, h, c, h2);
      if (zone) {
        out.h = zoneout_mix(h, out.h, cfg.zoneout_prob, *rng);
        out.c = zoneout_mix(c, out.c, cfg.zoneout_prob, *rng);
      }
      h = out.h;
      c = out.c;
      states[t] = h;
    }
    return states;
  };
  auto fwd = run_direction("enc_lstm_fwd", false);
  auto bwd = run_direction("enc_lstm_bwd", true);
  std::vector<Tensor> rows(l);
  for (std::int64_t t = 0; t < l; ++t) {
    std::array<Tensor, 2> fb{fwd[t], bwd[t]};
    rows[t] = concat_cols(fb);
  }
  EncoderStates enc;
  enc.states = concat_rows(rows);
  enc.length = l;
  return enc;
}

EncoderStates condition(const EncoderStates& enc, const Tensor& z,
                        const ModelConfig& cfg, ParameterStore& params) {
  Tensor zr = z.rank() == 1 ? reshape(z, {1, cfg.latent_dim}) : z;
  Tensor proj = linear(zr, params.get("cond.w"), params.get("cond.b"));
  EncoderStates out;
  out.states = add_rowvec(enc.states, proj);
  out.length = enc.length;
  return out;
}

Tensor zoneout_mix(const Tensor& prev, const Tensor& next, double p, Rng& rng) {
  if (p <= 0.0) return next;
  std::vector<double> keep(next.numel()), fresh(next.numel());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const bool z = rng.uniform() < p;
    keep[i] = z ? 1.0 : 0.0;
    fresh[i] = z ? 0.0 : 1.0;
  }
  return add(mul(Tensor::from(next.shape(), std::move(keep)), prev),
             mul(Tensor::from(next.shape(), std::move(fresh)), next));
}

// ---- Attention --------------------------------------------------------------

namespace {

// Shared attention core; `memory` is enc.states * attn_memory.w, precomputed
// once per utterance because it is constant across decoder steps.
AttendResult attend_impl(const Tensor& query, const Tensor& enc_states,
                         const Tensor& memory, const Tensor& prev_weights,
                         const Tensor& cum_weights, const ModelConfig& cfg,
                         ParameterStore& params) {
  const std::int64_t l = enc_states.rows();
  Tensor wq = matmul(query, params.get("attn_query.w"));  // 1 x A
  std::array<Tensor, 2> loc{reshape(prev_weights, {l, 1}),
                            reshape(cum_weights, {l, 1})};
  Tensor f = conv1d_same(concat_cols(loc), params.get("attn_loc_conv.w"),
                         Tensor(), cfg.attn_location_kernel);
  Tensor uf = matmul(f, params.get("attn_loc_proj.w"));  // L x A
  Tensor pre = add_rowvec(add(memory, uf), wq);
  pre = add_rowvec(pre, params.get("attn.b"));
  Tensor e = matmul(tanh_op(pre), params.get("attn_score.v"));  // L x 1
  AttendResult out;
  out.weights = softmax_vec(reshape(e, {l}));
  out.context = matmul(reshape(out.weights, {1, l}), enc_states);
  return out;
}

}  // namespace

AttendResult attend(const Tensor& query, const EncoderStates& enc,
                    const Tensor& prev_weights, const Tensor& cum_weights,
                    const ModelConfig& cfg, ParameterStore& params) {
  if (prev_weights.numel() != enc.length ||
      cum_weights.numel() != enc.length) {
    throw ContractError("attention weight vectors must match encoder length");
  }
  Tensor memory = matmul(enc.states, params.get("attn_memory.w"));
  return attend_impl(query, enc.states, memory, prev_weights, cum_weights, cfg,
                     params);
}

// ---- Decoder ----------------------------------------------------------------

DecoderState decoder_init(const ModelConfig& cfg, std::int64_t batch) {
  DecoderState s;
  s.h1 = Tensor::zeros({batch, cfg.dec_lstm_units});
  s.c1 = Tensor::zeros({batch, cfg.dec_lstm_units});
  s.h2 = Tensor::zeros({batch, cfg.dec_lstm_units});
  s.c2 = Tensor::zeros({batch, cfg.dec_lstm_units});
  return s;
}

DecodeStepResult decode_step(const Tensor& prev_frame, const Tensor& context,
                             const DecoderState& state, const ModelConfig& cfg,
                             ParameterStore& params, bool training, Rng* rng) {
  Tensor p = prev_frame.rank() == 1
                 ? reshape(prev_frame, {1, cfg.mel_dim})
                 : prev_frame;
  Tensor ctx = context.rank() == 1
                   ? reshape(context, {1, cfg.enc_lstm_units})
                   : context;
  const bool drop = training && cfg.prenet_dropout > 0.0;
  if (drop && rng == nullptr) {
    throw ContractError("decode_step needs an rng for prenet dropout");
  }
  for (std::size_t l = 0; l < cfg.dec_prenet_dims.size(); ++l) {
    const std::string name = "prenet" + std::to_string(l + 1);
    p = relu(linear(p, params.get(name + ".w"), params.get(name + ".b")));
    if (drop) p = dropout(p, cfg.prenet_dropout, *rng, true);
  }
  std::array<Tensor, 2> in1{p, ctx};
  LstmOut l1 = lstm_step(params, "dec_lstm1", concat_cols(in1), state.h1,
                         state.c1, cfg.dec_lstm_units);
  std::array<Tensor, 2> in2{l1.h, ctx};
  LstmOut l2 = lstm_step(params, "dec_lstm2", concat_cols(in2), state.h2,
                         state.c2, cfg.dec_lstm_units);
  std::array<Tensor, 2> hc{l2.h, ctx};
  Tensor joined = concat_cols(hc);
  DecodeStepResult out;
  out.frame = linear(joined, params.get("proj_mel.w"), params.get("proj_mel.b"));
  out.stop_logit =
      linear(joined, params.get("proj_stop.w"), params.get("proj_stop.b"));
  out.state = {l1.h, l1.c, l2.h, l2.c};
  return out;
}

Tensor postnet(const Tensor& frames, const ModelConfig& /*cfg*/,
               ParameterStore& params) {
  Tensor x = frames;
  for (int l = 1; l <= 5; ++l) {
    const std::string p = "postnet" + std::to_string(l);
    x = conv1d_same(x, params.get(p + ".w"), params.get(p + ".b"), 5);
    if (l < 5) x = tanh_op(x);
  }
  return x;
}

// ---- Full passes -------------------------------------------------------------

namespace {

// One utterance's attention loop state.
struct ItemAttention {
  Tensor enc_states;
  Tensor memory;
  Tensor prev_w;
  Tensor cum_w;
  std::int64_t length = 0;
};

ItemAttention init_item_attention(const EncoderStates& enc,
                                  ParameterStore& params) {
  ItemAttention it;
  it.enc_states = enc.states;
  it.memory = matmul(enc.states, params.get("attn_memory.w"));
  it.length = enc.length;
  std::vector<double> delta(enc.length, 0.0);
  delta[0] = 1.0;
  it.prev_w = Tensor::from({enc.length}, std::move(delta));
  it.cum_w = Tensor::zeros({enc.length});
  return it;
}

}  // namespace

ForwardResult forward_teacher_forced(
    const corpus::Batch& batch, const ModelConfig& cfg, ParameterStore& params,
    Rng& rng, bool training,
    const std::vector<std::vector<double>>* eps_override) {
  const std::int64_t b = batch.batch;
  const std::int64_t t_max = batch.t_max;
  const std::int64_t mel_dim = cfg.mel_dim;
  if (batch.n_mels != mel_dim) {
    throw ContractError("batch mel dim " + std::to_string(batch.n_mels) +
                        " != model mel dim " + std::to_string(mel_dim));
  }

  ForwardResult result;
  std::vector<ItemAttention> attn;
  attn.reserve(b);
  for (std::int64_t i = 0; i < b; ++i) {
    const std::int64_t t_i = batch.mel_lengths[i];
    audio::MelSpectrogram ref = audio::make_mel(t_i, mel_dim, 0.0);
    std::copy_n(batch.mels.begin() + i * t_max * mel_dim, t_i * mel_dim,
                ref.data.begin());
    Tensor embedding = reference_encode(ref, cfg, params);
    std::vector<double> eps = eps_override != nullptr
                                  ? (*eps_override)[i]
                                  : rng.normal_vec(cfg.latent_dim);
    result.latents.push_back(latent_heads(embedding, cfg, params, eps));

    std::span<const std::int64_t> ids(
        batch.text_ids.data() + i * batch.l_max,
        static_cast<std::size_t>(batch.text_lengths[i]));
    EncoderStates enc = text_encode(ids, cfg, params, training, &rng);
    enc = condition(enc, result.latents.back().z, cfg, params);
    attn.push_back(init_item_attention(enc, params));
  }

  DecoderState state = decoder_init(cfg, b);
  Tensor prev_frame = Tensor::zeros({b, mel_dim});
  std::vector<Tensor> frames, stops;
  frames.reserve(t_max);
  stops.reserve(t_max);
  std::vector<std::vector<double>> alignments(b);

  for (std::int64_t t = 0; t < t_max; ++t) {
    std::vector<Tensor> contexts(b);
    for (std::int64_t i = 0; i < b; ++i) {
      Tensor query = slice_rows(state.h1, i, 1);
      AttendResult att = attend_impl(query, attn[i].enc_states, attn[i].memory,
                                     attn[i].prev_w, attn[i].cum_w, cfg,
                                     params);
      attn[i].cum_w = add(attn[i].cum_w, att.weights);
      attn[i].prev_w = att.weights;
      contexts[i] = att.context;
      if (t < batch.mel_lengths[i]) {
        auto wv = att.weights.values();
        alignments[i].insert(alignments[i].end(), wv.begin(), wv.end());
      }
    }
    Tensor ctx = concat_rows(contexts);
    DecodeStepResult step =
        decode_step(prev_frame, ctx, state, cfg, params, training, &rng);
    frames.push_back(step.frame);
    stops.push_back(step.stop_logit);
    state = step.state;

    // Teacher forcing: the next input is the ground-truth frame at t. Past an
    // item's final frame the input is pinned to the canonical padding (the
    // normalized floor, zero) so padded mel values cannot reach any loss.
    std::vector<double> next(b * mel_dim, 0.0);
    for (std::int64_t i = 0; i < b; ++i) {
      if (t >= batch.mel_lengths[i]) continue;
      for (std::int64_t m = 0; m < mel_dim; ++m) {
        next[i * mel_dim + m] =
            normalize_mel_value(cfg, batch.mel_at(i, t, m));
      }
    }
    prev_frame = Tensor::from({b, mel_dim}, std::move(next));
  }

  Tensor frames_all = concat_rows(frames);  // (t_max * b) x mel_dim
  Tensor stops_all = concat_rows(stops);    // (t_max * b) x 1
  for (std::int64_t i = 0; i < b; ++i) {
    const std::int64_t t_i = batch.mel_lengths[i];
    std::vector<std::int64_t> valid_idx(t_i);
    for (std::int64_t t = 0; t < t_i; ++t) valid_idx[t] = t * b + i;
    Tensor before = gather_rows(frames_all, valid_idx);
    Tensor after = add(before, postnet(before, cfg, params));
    std::vector<std::int64_t> all_idx(t_max);
    for (std::int64_t t = 0; t < t_max; ++t) all_idx[t] = t * b + i;
    Tensor stop_logits = reshape(gather_rows(stops_all, all_idx), {t_max});

    DecoderOutput out;
    out.mel_before = before;
    out.mel_after = after;
    out.stop_logits = stop_logits;
    out.alignments = std::move(alignments[i]);
    out.align_rows = t_i;
    out.align_cols = attn[i].length;
    result.outputs.push_back(std::move(out));
  }
  return result;
}

DecoderOutput forward_inference(std::span<const std::int64_t> text_ids,
                                std::span<const double> z,
                                const ModelConfig& cfg, ParameterStore& params,
                                std::int64_t max_frames) {
  if (max_frames < 1) {
    throw ContractError("forward_inference requires max_frames >= 1");
  }
  if (static_cast<std::int64_t>(z.size()) != cfg.latent_dim) {
    throw ContractError("z length " + std::to_string(z.size()) +
                        " != latent_dim " + std::to_string(cfg.latent_dim));
  }
  NoGradGuard no_grad;
  EncoderStates enc = text_encode(text_ids, cfg, params);
  Tensor z_t = Tensor::from({1, cfg.latent_dim},
                            std::vector<double>(z.begin(), z.end()));
  enc = condition(enc, z_t, cfg, params);
  ItemAttention attn = init_item_attention(enc, params);

  DecoderState state = decoder_init(cfg, 1);
  Tensor prev_frame = Tensor::zeros({1, cfg.mel_dim});
  std::vector<Tensor> frames, stops;
  DecoderOutput out;
  out.truncated = true;
  for (std::int64_t t = 0; t < max_frames; ++t) {
    AttendResult att = attend_impl(state.h1, attn.enc_states, attn.memory,
                                   attn.prev_w, attn.cum_w, cfg, params);
    attn.cum_w = add(attn.cum_w, att.weights);
    attn.prev_w = att.weights;
    auto wv = att.weights.values();
    out.alignments.insert(out.alignments.end(), wv.begin(), wv.end());

    DecodeStepResult step =
        decode_step(prev_frame, att.context, state, cfg, params);
    frames.push_back(step.frame);
    stops.push_back(step.stop_logit);
    state = step.state;
    prev_frame = step.frame;

    const double stop_p =
        1.0 / (1.0 + std::exp(-step.stop_logit.item()));
    if (stop_p > 0.5) {
      out.truncated = false;
      break;
    }
  }
  out.mel_before = concat_rows(frames);
  out.mel_after = add(out.mel_before, postnet(out.mel_before, cfg, params));
  out.stop_logits = reshape(concat_rows(stops),
                            {static_cast<std::int64_t>(stops.size())});
  out.align_rows = static_cast<std::int64_t>(frames.size());
  out.align_cols = enc.length;
  return out;
}

// ---- Checkpoints ------------------------------------------------------------

void save_checkpoint(const std::string& dir, const ModelConfig& cfg,
                     const ParameterStore& params, std::int64_t step,
                     std::uint64_t seed) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint dir '" + dir + "'");
  const std::string cfg_text = config::serialize_kv(config::model_to_kv(cfg));
  {
    std::ofstream f(fs::path(dir) / "config.txt",
                    std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write config in '" + dir + "'");
    f << cfg_text;
  }
  {
    std::ofstream f(fs::path(dir) / "state.txt",
                    std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write state in '" + dir + "'");
    f << "step=" << step << "\n";
    f << "seed=" << seed << "\n";
    f << "config_hash=" << config::fnv1a(cfg_text) << "\n";
  }
  params.save((fs::path(dir) / "params.vstp").string());
}

Checkpoint load_checkpoint(const std::string& dir) {
  const auto cfg_path = (fs::path(dir) / "config.txt").string();
  std::ifstream cf(cfg_path, std::ios::binary);
  if (!cf) throw IoError("cannot open '" + cfg_path + "'");
  std::string cfg_text((std::istreambuf_iterator<char>(cf)),
                       std::istreambuf_iterator<char>());
  const auto state =
      config::parse_kv_file((fs::path(dir) / "state.txt").string());
  auto it = state.find("config_hash");
  if (it == state.end()) {
    throw ParseError("checkpoint '" + dir + "' state.txt lacks config_hash");
  }
  if (std::stoull(it->second) != config::fnv1a(cfg_text)) {
    throw ConfigError("checkpoint '" + dir +
                      "' config hash mismatch; config.txt was modified");
  }
  Checkpoint ckpt;
  ckpt.cfg =
      config::model_from_kv(config::parse_kv_text(cfg_text, cfg_path));
  ckpt.params = ParameterStore::load((fs::path(dir) / "params.vstp").string());
  ckpt.step = std::stoll(state.at("step"));
  ckpt.seed = std::stoull(state.at("seed"));
  ckpt.params.set_rng_seed(ckpt.seed);
  return ckpt;
}

}  // namespace vstyle::model
