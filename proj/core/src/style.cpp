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

#include "vstyle/style.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace vstyle::style {

StyleVector infer_style(const audio::MelSpectrogram& reference,
                        const model::ModelConfig& cfg, ParameterStore& params,
                        InferMode mode, Rng& rng) {
  NoGradGuard no_grad;
  Tensor embedding = model::reference_encode(reference, cfg, params);
  std::vector<double> eps(cfg.latent_dim, 0.0);
  if (mode == InferMode::kSample) eps = rng.normal_vec(cfg.latent_dim);
  model::LatentVariable lat = model::latent_heads(embedding, cfg, params, eps);
  StyleVector out;
  out.origin = Origin::kInferred;
  const Tensor& src = mode == InferMode::kMean ? lat.mu : lat.z;
  out.values.assign(src.values().begin(), src.values().end());
  return out;
}

StyleVector interpolate(const StyleVector& z_a, const StyleVector& z_b,
                        double alpha) {
  if (z_a.dim() != z_b.dim()) {
    throw ContractError("interpolate: dimension mismatch");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ContractError("interpolate: alpha " + std::to_string(alpha) +
                        " outside [0, 1]");
  }
  StyleVector out;
  out.origin = Origin::kInterpolated;
  out.values.resize(z_a.values.size());
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = alpha * z_a.values[i] + (1.0 - alpha) * z_b.values[i];
  }
  return out;
}

StyleVector set_dimension(const StyleVector& z, std::int64_t dim,
                          double value) {
  if (dim < 0 || dim >= z.dim()) {
    throw ContractError("set_dimension: index " + std::to_string(dim) +
                        " outside [0, " + std::to_string(z.dim()) + ")");
  }
  StyleVector out = z;
  out.origin = Origin::kManual;
  out.values[dim] = value;
  return out;
}

StyleVector combine(const StyleVector& z_a, const StyleVector& z_b) {
  if (z_a.dim() != z_b.dim()) {
    throw ContractError("combine: dimension mismatch");
  }
  StyleVector out;
  out.origin = Origin::kCombined;
  out.values.resize(z_a.values.size());
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = z_a.values[i] + z_b.values[i];
  }
  return out;
}

StyleVector sample_prior(Rng& rng, std::int64_t latent_dim) {
  StyleVector out;
  out.origin = Origin::kPriorSample;
  out.values = rng.normal_vec(latent_dim);
  return out;
}

model::DecoderOutput transfer(std::span<const std::int64_t> text,
                              const audio::MelSpectrogram& reference,
                              const model::ModelConfig& cfg,
                              ParameterStore& params,
                              std::int64_t max_frames) {
  Rng unused(0);
  StyleVector z = infer_style(reference, cfg, params, InferMode::kMean, unused);
  return model::forward_inference(text, z.values, cfg, params, max_frames);
}

SpectrogramStats probe_stats(const audio::MelSpectrogram& m) {
  if (m.frames < 1) {
    throw ContractError("probe_stats requires at least one frame");
  }
  SpectrogramStats s;
  s.frame_count = m.frames;
  const double floor_v = audio::log_floor();
  const double neutral = static_cast<double>(m.n_mels - 1) / 2.0;
  std::vector<double> centroids(m.frames);
  double energy_sum = 0.0;
  for (std::int64_t t = 0; t < m.frames; ++t) {
    double wsum = 0.0, bsum = 0.0;
    for (std::int64_t band = 0; band < m.n_mels; ++band) {
      const double w = std::max(m.at(t, band) - floor_v, 0.0);
      wsum += w;
      bsum += w * static_cast<double>(band);
      energy_sum += w;
    }
    centroids[t] = wsum > 0.0 ? bsum / wsum : neutral;
  }
  s.mean_energy = energy_sum / static_cast<double>(m.frames * m.n_mels);
  double mean = 0.0;
  for (double c : centroids) mean += c;
  mean /= static_cast<double>(m.frames);
  double var = 0.0;
  for (double c : centroids) var += (c - mean) * (c - mean);
  var /= static_cast<double>(m.frames);
  s.centroid_mean = mean;
  s.centroid_var = var;
  return s;
}

void write_style_vector(const std::string& path, const StyleVector& z) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  char buf[40];
  for (double v : z.values) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", v);
    f << buf;
  }
  if (!f) throw IoError("short write to '" + path + "'");
}

StyleVector read_style_vector(const std::string& path,
                              std::int64_t expected_dim) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "'");
  StyleVector z;
  z.origin = Origin::kManual;
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(f, line)) {
    lineno += 1;
    if (line.empty()) continue;
    try {
      std::size_t used = 0;
      const double v = std::stod(line, &used);
      z.values.push_back(v);
      (void)used;
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": not a real number: '" + line + "'");
    }
  }
  if (expected_dim >= 0 && z.dim() != expected_dim) {
    throw ParseError(path + ": expected " + std::to_string(expected_dim) +
                     " values, found " + std::to_string(z.dim()));
  }
  return z;
}

void append_stats_row(const std::string& path, const std::string& id,
                      const SpectrogramStats& s) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream f(path, std::ios::binary | std::ios::app);
  if (!f) throw IoError("cannot open '" + path + "'");
  if (fresh) {
    f << "id\tframe_count\tmean_energy\tcentroid_mean\tcentroid_var\n";
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s\t%lld\t%.17g\t%.17g\t%.17g\n",
                id.c_str(), static_cast<long long>(s.frame_count),
                s.mean_energy, s.centroid_mean, s.centroid_var);
  f << buf;
  if (!f) throw IoError("short write to '" + path + "'");
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw ContractError("spearman needs two equal-length series (n >= 2)");
  }
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double num = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  const double denom = std::sqrt(va * vb);
  return denom > 0.0 ? num / denom : 0.0;
}

DimensionProbe find_correlated_dimension(const std::vector<StyleVector>& latents,
                                         std::span<const double> factor) {
  if (latents.empty() || latents.size() != factor.size()) {
    throw ContractError("find_correlated_dimension: size mismatch");
  }
  const std::int64_t dim = latents.front().dim();
  DimensionProbe best;
  for (std::int64_t d = 0; d < dim; ++d) {
    std::vector<double> series(latents.size());
    for (std::size_t i = 0; i < latents.size(); ++i) {
      series[i] = latents[i].values[d];
    }
    const double c = spearman(series, factor);
    if (best.dim < 0 || std::abs(c) > std::abs(best.correlation)) {
      best.dim = d;
      best.correlation = c;
    }
  }
  return best;
}

}  // namespace vstyle::style
