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

#ifndef VSTYLE_TRAINING_HPP_
#define VSTYLE_TRAINING_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vstyle/corpus.hpp"
#include "vstyle/model.hpp"
#include "vstyle/optim.hpp"

namespace vstyle::training {

// KL weight ramp and every-K-step gating. The K period switches from
// k_before to k_after at k_switch_step.
struct AnnealSchedule {
  std::int64_t ramp_start_step = 250;
  std::int64_t ramp_end_step = 1250;
  std::int64_t k_before = 100;
  std::int64_t k_after = 400;
  std::int64_t k_switch_step = 15000;

  // Published-scale schedule (ramp over steps 1000..21000).
  static AnnealSchedule paper();
  // Degenerate schedule: weight 1 and the KL term live from the first step.
  static AnnealSchedule always_on();

  void validate() const;
};

// 0 before the ramp, linear to 1 across it, 1 after; monotone nondecreasing.
double kl_weight(std::int64_t step, const AnnealSchedule& sched);
// True iff step is a multiple of the active period K(step).
bool kl_active(std::int64_t step, const AnnealSchedule& sched);

// Closed-form KL of N(mu, diag(exp(log_sigma)^2)) against N(0, I):
// 0.5 * sum(mu^2 + exp(2*log_sigma) - 1 - 2*log_sigma). Differentiable in
// both inputs and always >= 0.
Tensor kl_closed_form(const Tensor& mu, const Tensor& log_sigma);

// Masked MSE summed over pre- and post-postnet predictions, normalized by the
// unmasked element count (counted once).
Tensor recon_loss(const Tensor& pred_before, const Tensor& pred_after,
                  const Tensor& target, const Tensor& mask);

// Masked mean binary cross-entropy with logits.
Tensor stop_loss(const Tensor& stop_logits, const Tensor& stop_targets,
                 const Tensor& mask);

struct LossBreakdown {
  double recon_l2 = 0.0;
  double kl = 0.0;
  double stop = 0.0;
  double kl_weight = 0.0;
  bool kl_active = false;
  double total = 0.0;
};

struct TrainConfig {
  model::ModelConfig model;
  AnnealSchedule sched;
  AdamConfig adam{.lr = 8e-3};  // desk-scale default; see config docs
  std::int64_t batch_size = 8;
  double grad_clip = 5.0;
  std::uint64_t seed = 1234;
  std::int64_t checkpoint_every = 500;
  std::int64_t batch_extra_pad = 4;
};

struct TrainState {
  std::int64_t step = 0;  // completed steps; history rows are 1-based
  ParameterStore params;
  std::vector<std::pair<std::int64_t, LossBreakdown>> history;
};

TrainState init_train_state(const TrainConfig& cfg);

// One optimization step: teacher-forced forward, Eq-style loss assembly
// (recon + stop + gated, annealed KL), backward, gradient-norm clip, Adam.
// The KL value is computed and logged even on steps where the gate keeps it
// out of the objective. Throws NumericError naming the first non-finite
// tensor if the forward pass degenerates.
LossBreakdown train_step(TrainState& state, const corpus::Batch& batch,
                         const TrainConfig& cfg);

// Batches for one epoch; the bucket order is a pure function of
// (seed, epoch), so resuming at step s reproduces the original stream.
std::vector<corpus::Batch> epoch_batches(
    const std::vector<corpus::Utterance>& train_set, const TrainConfig& cfg,
    std::int64_t epoch);

// Full loop with periodic checkpoints (ckpt_<step>/ directories) and a
// history TSV. Resumes from resume_ckpt when given; history rows continue
// at step s+1 with no gap.
TrainState train(const TrainConfig& cfg,
                 const std::vector<corpus::Utterance>& corpus,
                 std::int64_t n_steps, const std::string& out_dir,
                 const std::string& resume_ckpt = "");

// ---- History file -----------------------------------------------------------

struct HistoryRow {
  std::int64_t step;
  double recon_l2;
  double kl;
  double stop;
  double kl_weight;
  bool kl_active;
  double total;
};

void append_history(const std::string& path, std::int64_t step,
                    const LossBreakdown& loss, bool write_header);
std::vector<HistoryRow> read_history(const std::string& path);

// KL-collapse diagnostic over a training history. "Post-ramp" rows are those
// with kl_weight == 1.
struct DiagReport {
  std::int64_t rows = 0;
  std::int64_t post_ramp_rows = 0;
  double post_ramp_mean_kl = 0.0;
  double post_ramp_min_kl = 0.0;
  double final_window_mean_kl = 0.0;  // last 10% of rows
  double first_weight = 0.0;
  double last_weight = 0.0;
  bool collapsed = false;  // post-ramp mean KL < 1e-3
};

DiagReport diagnose(const std::vector<HistoryRow>& rows);
std::string format_diag(const DiagReport& d);

}  // namespace vstyle::training

#endif  // VSTYLE_TRAINING_HPP_
