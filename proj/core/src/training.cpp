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

#include "vstyle/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "vstyle/config.hpp"

namespace vstyle::training {

namespace fs = std::filesystem;

namespace {

// Distinct stream namespaces hung off the master seed so resuming at step s
// regenerates exactly the draws the original run would have made.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kEpochStreamBase = 1'000'000;
constexpr std::uint64_t kStepStreamBase = 2'000'000'000;

}  // namespace

AnnealSchedule AnnealSchedule::paper() {
  AnnealSchedule s;
  s.ramp_start_step = 1000;
  s.ramp_end_step = 21000;
  return s;
}

AnnealSchedule AnnealSchedule::always_on() {
  AnnealSchedule s;
  s.ramp_start_step = 0;
  s.ramp_end_step = 1;
  s.k_before = 1;
  s.k_after = 1;
  return s;
}

void AnnealSchedule::validate() const {
  if (ramp_start_step >= ramp_end_step) {
    throw ConfigError("KL ramp start must precede ramp end");
  }
  if (k_before < 1 || k_after < 1) {
    throw ConfigError("KL gate periods must be >= 1");
  }
  if (k_switch_step < 0) {
    throw ConfigError("KL gate switch step must be >= 0");
  }
}

double kl_weight(std::int64_t step, const AnnealSchedule& sched) {
  if (step < 0) throw ContractError("kl_weight requires step >= 0");
  if (step <= sched.ramp_start_step) return 0.0;
  if (step >= sched.ramp_end_step) return 1.0;
  return static_cast<double>(step - sched.ramp_start_step) /
         static_cast<double>(sched.ramp_end_step - sched.ramp_start_step);
}

bool kl_active(std::int64_t step, const AnnealSchedule& sched) {
  if (step < 0) throw ContractError("kl_active requires step >= 0");
  const std::int64_t k =
      step < sched.k_switch_step ? sched.k_before : sched.k_after;
  return step % k == 0;
}

Tensor kl_closed_form(const Tensor& mu, const Tensor& log_sigma) {
  if (mu.numel() != log_sigma.numel()) {
    throw ShapeError("kl_closed_form: mu and log_sigma lengths differ");
  }
  // 0.5 * sum(mu^2 + exp(2 ls) - 1 - 2 ls)
  Tensor mu2 = mul(mu, mu);
  Tensor var = exp_op(scale(log_sigma, 2.0));
  Tensor inner = sub(add(mu2, var), add_const(scale(log_sigma, 2.0), 1.0));
  return scale(sum_all(inner), 0.5);
}

Tensor recon_loss(const Tensor& pred_before, const Tensor& pred_after,
                  const Tensor& target, const Tensor& mask) {
  if (pred_before.shape() != target.shape() ||
      pred_after.shape() != target.shape()) {
    throw ShapeError("recon_loss shape mismatch");
  }
  double count = 0.0;
  for (double m : mask.values()) count += (m != 0.0 ? 1.0 : 0.0);
  if (count == 0.0) {
    throw ContractError("recon_loss: mask excludes every frame");
  }
  const double denom = count * static_cast<double>(target.cols());
  Tensor sse = add(masked_sse(pred_before, target, mask),
                   masked_sse(pred_after, target, mask));
  return scale(sse, 1.0 / denom);
}

Tensor stop_loss(const Tensor& stop_logits, const Tensor& stop_targets,
                 const Tensor& mask) {
  double count = 0.0;
  for (double m : mask.values()) count += (m != 0.0 ? 1.0 : 0.0);
  if (count == 0.0) {
    throw ContractError("stop_loss: mask excludes every frame");
  }
  return scale(bce_logits_sum(stop_logits, stop_targets, mask), 1.0 / count);
}

TrainState init_train_state(const TrainConfig& cfg) {
  cfg.model.validate();
  cfg.sched.validate();
  TrainState state;
  state.params = model::init_parameters(cfg.model, cfg.seed);
  return state;
}

LossBreakdown train_step(TrainState& state, const corpus::Batch& batch,
                         const TrainConfig& cfg) {
  const std::int64_t step = state.step + 1;
  Rng step_rng = Rng(cfg.seed).split(kStepStreamBase + step);

  Tape tape;
  model::ForwardResult fwd = model::forward_teacher_forced(
      batch, cfg.model, state.params, step_rng, /*training=*/true);

  const std::int64_t b = batch.batch;
  // Reconstruction: per-item SSE joined, then one normalization over the
  // total unmasked element count.
  std::vector<Tensor> sse_terms;
  double recon_elems = 0.0;
  std::vector<Tensor> stop_terms;
  double stop_count = 0.0;
  std::vector<Tensor> kl_terms;
  for (std::int64_t i = 0; i < b; ++i) {
    const std::int64_t t_i = batch.mel_lengths[i];
    std::vector<double> target(t_i * cfg.model.mel_dim);
    for (std::int64_t t = 0; t < t_i; ++t) {
      for (std::int64_t m = 0; m < cfg.model.mel_dim; ++m) {
        target[t * cfg.model.mel_dim + m] =
            model::normalize_mel_value(cfg.model, batch.mel_at(i, t, m));
      }
    }
    Tensor target_t =
        Tensor::from({t_i, cfg.model.mel_dim}, std::move(target));
    Tensor ones = Tensor::full({t_i}, 1.0);
    sse_terms.push_back(
        masked_sse(fwd.outputs[i].mel_before, target_t, ones));
    sse_terms.push_back(masked_sse(fwd.outputs[i].mel_after, target_t, ones));
    recon_elems += static_cast<double>(t_i * cfg.model.mel_dim);

    // Stop loss spans the padded region: its targets stay 1 past the final
    // frame so the decoder learns to hold the stop decision.
    std::vector<double> stop_target(batch.t_max);
    for (std::int64_t t = 0; t < batch.t_max; ++t) {
      stop_target[t] = batch.stop_targets[i * batch.t_max + t];
    }
    Tensor stop_t = Tensor::from({batch.t_max}, std::move(stop_target));
    Tensor stop_mask = Tensor::full({batch.t_max}, 1.0);
    stop_terms.push_back(
        bce_logits_sum(fwd.outputs[i].stop_logits, stop_t, stop_mask));
    stop_count += static_cast<double>(batch.t_max);

    kl_terms.push_back(
        kl_closed_form(fwd.latents[i].mu, fwd.latents[i].log_sigma));
  }

  auto sum_terms = [](std::vector<Tensor>& terms) {
    Tensor acc = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
    return acc;
  };
  Tensor recon = scale(sum_terms(sse_terms), 1.0 / recon_elems);
  Tensor stop = scale(sum_terms(stop_terms), 1.0 / stop_count);
  Tensor kl = scale(sum_terms(kl_terms), 1.0 / static_cast<double>(b));

  LossBreakdown loss;
  loss.kl_weight = kl_weight(step, cfg.sched);
  loss.kl_active = kl_active(step, cfg.sched);
  Tensor total = add(recon, stop);
  if (loss.kl_active && loss.kl_weight > 0.0) {
    total = add(total, scale(kl, loss.kl_weight));
  }
  loss.recon_l2 = recon.item();
  loss.stop = stop.item();
  loss.kl = kl.item();
  loss.total = total.item();

  backward(total, state.params);
  clip_grad_norm(state.params, cfg.grad_clip);
  adam_step(state.params, cfg.adam, step);
  state.step = step;
  state.history.emplace_back(step, loss);
  return loss;
}

std::vector<corpus::Batch> epoch_batches(
    const std::vector<corpus::Utterance>& train_set, const TrainConfig& cfg,
    std::int64_t epoch) {
  Rng rng =
      Rng(cfg.seed).split(kEpochStreamBase + static_cast<std::uint64_t>(epoch));
  return corpus::make_batches(train_set, cfg.batch_size, rng,
                              cfg.batch_extra_pad);
}

void append_history(const std::string& path, std::int64_t step,
                    const LossBreakdown& loss, bool write_header) {
  std::ofstream f(path, std::ios::binary | std::ios::app);
  if (!f) throw IoError("cannot open history '" + path + "'");
  if (write_header) {
    f << "step\trecon_l2\tkl\tstop\tkl_weight\tkl_active\ttotal\n";
  }
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%lld\t%.17g\t%.17g\t%.17g\t%.17g\t%d\t%.17g\n",
                static_cast<long long>(step), loss.recon_l2, loss.kl,
                loss.stop, loss.kl_weight, loss.kl_active ? 1 : 0, loss.total);
  f << buf;
  if (!f) throw IoError("short write to history '" + path + "'");
}

TrainState train(const TrainConfig& cfg,
                 const std::vector<corpus::Utterance>& corpus_utts,
                 std::int64_t n_steps, const std::string& out_dir,
                 const std::string& resume_ckpt) {
  if (corpus_utts.empty()) throw ContractError("train: empty corpus");
  std::vector<corpus::Utterance> train_set;
  for (const auto& u : corpus_utts) {
    if (u.split == "train") train_set.push_back(u);
  }
  if (train_set.empty()) {
    throw ContractError("train: corpus has no utterances in the train split");
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir + "'");

  TrainState state;
  if (!resume_ckpt.empty()) {
    model::Checkpoint ckpt = model::load_checkpoint(resume_ckpt);
    if (config::model_config_hash(ckpt.cfg) !=
        config::model_config_hash(cfg.model)) {
      throw ConfigError("resume checkpoint was trained with a different model "
                        "configuration");
    }
    state.params = std::move(ckpt.params);
    state.step = ckpt.step;
  } else {
    state = init_train_state(cfg);
  }

  const std::string history_path =
      (fs::path(out_dir) / "history.tsv").string();
  bool need_header = !fs::exists(history_path);

  // Walk the epoch stream forward to the resume point so the batch order
  // matches an uninterrupted run.
  std::int64_t epoch = 0;
  std::vector<corpus::Batch> batches = epoch_batches(train_set, cfg, epoch);
  std::size_t cursor = 0;
  for (std::int64_t s = 0; s < state.step; ++s) {
    cursor += 1;
    if (cursor >= batches.size()) {
      epoch += 1;
      batches = epoch_batches(train_set, cfg, epoch);
      cursor = 0;
    }
  }

  const std::int64_t target_step = state.step + n_steps;
  while (state.step < target_step) {
    LossBreakdown loss = train_step(state, batches[cursor], cfg);
    append_history(history_path, state.step, loss, need_header);
    need_header = false;
    cursor += 1;
    if (cursor >= batches.size()) {
      epoch += 1;
      batches = epoch_batches(train_set, cfg, epoch);
      cursor = 0;
    }
    if (cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0 &&
        state.step < target_step) {
      const std::string dir =
          (fs::path(out_dir) / ("ckpt_" + std::to_string(state.step)))
              .string();
      model::save_checkpoint(dir, cfg.model, state.params, state.step,
                             cfg.seed);
    }
  }
  const std::string final_dir =
      (fs::path(out_dir) / ("ckpt_" + std::to_string(state.step))).string();
  model::save_checkpoint(final_dir, cfg.model, state.params, state.step,
                         cfg.seed);
  return state;
}

std::vector<HistoryRow> read_history(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open history '" + path + "'");
  std::string line;
  if (!std::getline(f, line) || line.empty()) {
    throw ParseError(path + ":1: empty history file");
  }
  if (line.rfind("step\t", 0) != 0) {
    throw ParseError(path + ":1: missing history header");
  }
  std::vector<HistoryRow> rows;
  std::int64_t lineno = 1;
  while (std::getline(f, line)) {
    lineno += 1;
    if (line.empty()) continue;
    HistoryRow r{};
    int active = 0;
    const int got = std::sscanf(line.c_str(),
                                "%lld\t%lf\t%lf\t%lf\t%lf\t%d\t%lf",
                                reinterpret_cast<long long*>(&r.step),
                                &r.recon_l2, &r.kl, &r.stop, &r.kl_weight,
                                &active, &r.total);
    if (got != 7) {
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": malformed history row");
    }
    r.kl_active = active != 0;
    rows.push_back(r);
  }
  if (rows.empty()) {
    throw ParseError(path + ":1: history has a header but no rows");
  }
  return rows;
}

DiagReport diagnose(const std::vector<HistoryRow>& rows) {
  DiagReport d;
  d.rows = static_cast<std::int64_t>(rows.size());
  if (rows.empty()) return d;
  d.first_weight = rows.front().kl_weight;
  d.last_weight = rows.back().kl_weight;

  double post_sum = 0.0;
  double post_min = std::numeric_limits<double>::infinity();
  for (const auto& r : rows) {
    if (r.kl_weight >= 1.0) {
      d.post_ramp_rows += 1;
      post_sum += r.kl;
      post_min = std::min(post_min, r.kl);
    }
  }
  if (d.post_ramp_rows > 0) {
    d.post_ramp_mean_kl = post_sum / static_cast<double>(d.post_ramp_rows);
    d.post_ramp_min_kl = post_min;
    d.collapsed = d.post_ramp_mean_kl < 1e-3;
  }
  const std::size_t window =
      std::max<std::size_t>(1, rows.size() / 10);
  double wsum = 0.0;
  for (std::size_t i = rows.size() - window; i < rows.size(); ++i) {
    wsum += rows[i].kl;
  }
  d.final_window_mean_kl = wsum / static_cast<double>(window);
  return d;
}

std::string format_diag(const DiagReport& d) {
  std::ostringstream os;
  os << "history rows: " << d.rows << "\n";
  os << "kl weight trajectory: " << d.first_weight << " -> " << d.last_weight
     << "\n";
  os << "final-window mean kl: " << d.final_window_mean_kl << "\n";
  if (d.post_ramp_rows > 0) {
    os << "post-ramp rows: " << d.post_ramp_rows << "\n";
    os << "post-ramp mean kl: " << d.post_ramp_mean_kl << "\n";
    os << "post-ramp min kl: " << d.post_ramp_min_kl << "\n";
    os << "collapse: " << (d.collapsed ? "yes" : "no") << "\n";
  } else {
    os << "post-ramp rows: 0 (ramp not finished)\n";
    os << "collapse: n/a\n";
  }
  return os.str();
}

}  // namespace vstyle::training
