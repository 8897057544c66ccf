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

#ifndef VSTYLE_STYLE_HPP_
#define VSTYLE_STYLE_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vstyle/model.hpp"

namespace vstyle::style {

enum class Origin {
  kInferred,
  kManual,
  kInterpolated,
  kCombined,
  kPriorSample,
};

struct StyleVector {
  std::vector<double> values;
  Origin origin = Origin::kManual;

  std::int64_t dim() const { return static_cast<std::int64_t>(values.size()); }
};

enum class InferMode { kMean, kSample };

// Runs the recognition path on a reference spectrogram. kMean returns the
// posterior mean (deterministic); kSample draws eps and returns the
// reparameterized z.
StyleVector infer_style(const audio::MelSpectrogram& reference,
                        const model::ModelConfig& cfg, ParameterStore& params,
                        InferMode mode, Rng& rng);

// alpha * z_a + (1 - alpha) * z_b, exact vector arithmetic; alpha in [0, 1].
StyleVector interpolate(const StyleVector& z_a, const StyleVector& z_b,
                        double alpha);

// Copy of z with one coordinate replaced; all others bit-identical.
StyleVector set_dimension(const StyleVector& z, std::int64_t dim,
                          double value);

// Element-wise sum.
StyleVector combine(const StyleVector& z_a, const StyleVector& z_b);

// latent_dim i.i.d. standard-normal draws.
StyleVector sample_prior(Rng& rng, std::int64_t latent_dim);

// infer_style(kMean) on the reference, then free-running synthesis of the
// text under that style. Parallel vs non-parallel transfer is purely whether
// the text matches the reference's transcript; the operation is agnostic.
model::DecoderOutput transfer(std::span<const std::int64_t> text,
                              const audio::MelSpectrogram& reference,
                              const model::ModelConfig& cfg,
                              ParameterStore& params,
                              std::int64_t max_frames);

// Energy-weighted band statistics used to quantify style along interpretable
// axes; weights are (mel - log_floor) clamped at zero.
struct SpectrogramStats {
  std::int64_t frame_count = 0;
  double mean_energy = 0.0;
  double centroid_mean = 0.0;
  double centroid_var = 0.0;
};

SpectrogramStats probe_stats(const audio::MelSpectrogram& m);

// ---- File formats -----------------------------------------------------------

// Plain-text vector files: one real per line.
void write_style_vector(const std::string& path, const StyleVector& z);
StyleVector read_style_vector(const std::string& path,
                              std::int64_t expected_dim = -1);

// stats TSV: id, frame_count, mean_energy, centroid_mean, centroid_var.
void append_stats_row(const std::string& path, const std::string& id,
                      const SpectrogramStats& s);

// ---- Probes -----------------------------------------------------------------

// Spearman rank correlation (average ranks on ties).
double spearman(std::span<const double> a, std::span<const double> b);

struct DimensionProbe {
  std::int64_t dim = -1;
  double correlation = 0.0;
};

// argmax over latent dimensions of |spearman(mu_d, factor)|.
DimensionProbe find_correlated_dimension(
    const std::vector<StyleVector>& latents, std::span<const double> factor);

}  // namespace vstyle::style

#endif  // VSTYLE_STYLE_HPP_
