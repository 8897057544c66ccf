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

#include "vstyle/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "vstyle/error.hpp"

namespace vstyle::config {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::int64_t to_i64(const KvMap& kv, const std::string& key,
                    std::int64_t fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    return std::stoll(it->second);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not an integer: '" +
                      it->second + "'");
  }
}

double to_f64(const KvMap& kv, const std::string& key, double fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not a number: '" +
                      it->second + "'");
  }
}

std::vector<std::int64_t> to_i64_list(const KvMap& kv, const std::string& key,
                                      std::vector<std::int64_t> fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  std::vector<std::int64_t> out;
  std::stringstream ss(it->second);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    try {
      out.push_back(std::stoll(tok));
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' has a bad list entry: '" +
                        tok + "'");
    }
  }
  if (out.empty()) {
    throw ConfigError("config key '" + key + "' is an empty list");
  }
  return out;
}

std::string list_str(const std::vector<std::int64_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

KvMap parse_kv_text(const std::string& text, const std::string& origin) {
  KvMap kv;
  std::istringstream in(text);
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    lineno += 1;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(origin + ":" + std::to_string(lineno) +
                       ": expected key=value, got '" + line + "'");
    }
    const auto key = trim(line.substr(0, eq));
    const auto val = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ParseError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    kv[key] = val;
  }
  return kv;
}

KvMap parse_kv_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_kv_text(ss.str(), path);
}

std::string serialize_kv(const KvMap& kv) {
  std::string out;
  for (const auto& [k, v] : kv) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

KvMap model_to_kv(const model::ModelConfig& cfg) {
  KvMap kv;
  kv["latent_dim"] = std::to_string(cfg.latent_dim);
  kv["mel_dim"] = std::to_string(cfg.mel_dim);
  kv["text_vocab"] = std::to_string(cfg.text_vocab);
  kv["text_embed_dim"] = std::to_string(cfg.text_embed_dim);
  kv["enc_conv_channels"] = std::to_string(cfg.enc_conv_channels);
  kv["enc_lstm_units"] = std::to_string(cfg.enc_lstm_units);
  kv["ref_conv_channels"] = list_str(cfg.ref_conv_channels);
  kv["ref_gru_units"] = std::to_string(cfg.ref_gru_units);
  kv["attn_dim"] = std::to_string(cfg.attn_dim);
  kv["attn_location_filters"] = std::to_string(cfg.attn_location_filters);
  kv["attn_location_kernel"] = std::to_string(cfg.attn_location_kernel);
  kv["dec_prenet_dims"] = list_str(cfg.dec_prenet_dims);
  kv["dec_lstm_units"] = std::to_string(cfg.dec_lstm_units);
  kv["postnet_channels"] = std::to_string(cfg.postnet_channels);
  kv["zoneout_prob"] = fmt_double(cfg.zoneout_prob);
  kv["prenet_dropout"] = fmt_double(cfg.prenet_dropout);
  kv["mel_norm_scale"] = fmt_double(cfg.mel_norm_scale);
  return kv;
}

model::ModelConfig model_from_kv(const KvMap& kv) {
  model::ModelConfig cfg;
  cfg.latent_dim = to_i64(kv, "latent_dim", cfg.latent_dim);
  cfg.mel_dim = to_i64(kv, "mel_dim", cfg.mel_dim);
  cfg.text_vocab = to_i64(kv, "text_vocab", cfg.text_vocab);
  cfg.text_embed_dim = to_i64(kv, "text_embed_dim", cfg.text_embed_dim);
  cfg.enc_conv_channels =
      to_i64(kv, "enc_conv_channels", cfg.enc_conv_channels);
  cfg.enc_lstm_units = to_i64(kv, "enc_lstm_units", cfg.enc_lstm_units);
  cfg.ref_conv_channels =
      to_i64_list(kv, "ref_conv_channels", cfg.ref_conv_channels);
  cfg.ref_gru_units = to_i64(kv, "ref_gru_units", cfg.ref_gru_units);
  cfg.attn_dim = to_i64(kv, "attn_dim", cfg.attn_dim);
  cfg.attn_location_filters =
      to_i64(kv, "attn_location_filters", cfg.attn_location_filters);
  cfg.attn_location_kernel =
      to_i64(kv, "attn_location_kernel", cfg.attn_location_kernel);
  cfg.dec_prenet_dims = to_i64_list(kv, "dec_prenet_dims", cfg.dec_prenet_dims);
  cfg.dec_lstm_units = to_i64(kv, "dec_lstm_units", cfg.dec_lstm_units);
  cfg.postnet_channels = to_i64(kv, "postnet_channels", cfg.postnet_channels);
  cfg.zoneout_prob = to_f64(kv, "zoneout_prob", cfg.zoneout_prob);
  cfg.prenet_dropout = to_f64(kv, "prenet_dropout", cfg.prenet_dropout);
  cfg.mel_norm_scale = to_f64(kv, "mel_norm_scale", cfg.mel_norm_scale);
  cfg.validate();
  return cfg;
}

std::uint64_t model_config_hash(const model::ModelConfig& cfg) {
  return fnv1a(serialize_kv(model_to_kv(cfg)));
}

}  // namespace vstyle::config
