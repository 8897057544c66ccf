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

// Command-line surface: corpus generation, training, synthesis, latent-space
// style edits and training diagnostics, all byte-deterministic under fixed
// seeds.
//
// Exit codes: 0 success, 1 usage, 2 I/O or file format, 3 numeric failure.

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "vstyle/audio_io.hpp"
#include "vstyle/config.hpp"
#include "vstyle/corpus.hpp"
#include "vstyle/error.hpp"
#include "vstyle/style.hpp"
#include "vstyle/training.hpp"

namespace fs = std::filesystem;
using namespace vstyle;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumeric = 3;

std::uint64_t seed_or_env(const CLI::Option* opt, std::uint64_t value,
                          std::uint64_t fallback) {
  if (opt != nullptr && opt->count() > 0) return value;
  if (const char* env = std::getenv("STYLE_TTS_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return fallback;
}

std::vector<std::int64_t> tokenize_text(const std::string& text) {
  if (text.empty()) throw UsageError("--text must not be empty");
  std::vector<std::int64_t> ids;
  try {
    ids = corpus::text_to_tokens(text);
  } catch (const ParseError& e) {
    throw UsageError(std::string(e.what()) +
                     " (alphabet: a-z, space, '.', ',', '$')");
  }
  if (ids.back() != corpus::kEndId) ids.push_back(corpus::kEndId);
  return ids;
}

// ---- train config assembly --------------------------------------------------

training::TrainConfig train_config_from_kv(const config::KvMap& kv) {
  training::TrainConfig cfg;
  cfg.model = config::model_from_kv(kv);
  auto geti = [&](const char* key, std::int64_t fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : std::stoll(it->second);
  };
  auto getf = [&](const char* key, double fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : std::stod(it->second);
  };
  cfg.adam.lr = getf("lr", cfg.adam.lr);
  cfg.adam.beta1 = getf("beta1", cfg.adam.beta1);
  cfg.adam.beta2 = getf("beta2", cfg.adam.beta2);
  cfg.adam.eps = getf("adam_eps", cfg.adam.eps);
  cfg.batch_size = geti("batch_size", cfg.batch_size);
  cfg.grad_clip = getf("grad_clip", cfg.grad_clip);
  cfg.seed = static_cast<std::uint64_t>(geti("seed", cfg.seed));
  cfg.checkpoint_every = geti("checkpoint_every", cfg.checkpoint_every);
  cfg.batch_extra_pad = geti("batch_extra_pad", cfg.batch_extra_pad);
  cfg.sched.ramp_start_step = geti("kl_ramp_start", cfg.sched.ramp_start_step);
  cfg.sched.ramp_end_step = geti("kl_ramp_end", cfg.sched.ramp_end_step);
  cfg.sched.k_before = geti("k_before", cfg.sched.k_before);
  cfg.sched.k_after = geti("k_after", cfg.sched.k_after);
  cfg.sched.k_switch_step = geti("k_switch", cfg.sched.k_switch_step);
  return cfg;
}

// ---- subcommand bodies ------------------------------------------------------

int run_gen_corpus(const std::string& out, std::int64_t n,
                   std::uint64_t seed) {
  if (n < 1) throw UsageError("--n must be >= 1");
  auto utts = corpus::gen_corpus(Rng(seed), n);
  corpus::save_corpus(out, utts);
  std::cout << "wrote " << utts.size() << " utterances to " << out << "\n";
  return 0;
}

struct TrainArgs {
  std::string corpus_dir;
  std::string config_file;
  std::string out_dir;
  std::string resume;
  std::int64_t steps = 0;
  // flag overrides; negative/unset means "keep config value"
  std::optional<std::int64_t> kl_ramp_start, kl_ramp_end, k_before, k_after,
      k_switch, batch_size, checkpoint_every;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
};

int run_train(const TrainArgs& a) {
  if (a.steps < 1) throw UsageError("--steps must be >= 1");
  config::KvMap kv;
  if (!a.config_file.empty()) kv = config::parse_kv_file(a.config_file);
  training::TrainConfig cfg = train_config_from_kv(kv);
  if (a.lr) cfg.adam.lr = *a.lr;
  if (a.seed) cfg.seed = *a.seed;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.checkpoint_every) cfg.checkpoint_every = *a.checkpoint_every;
  if (a.kl_ramp_start) cfg.sched.ramp_start_step = *a.kl_ramp_start;
  if (a.kl_ramp_end) cfg.sched.ramp_end_step = *a.kl_ramp_end;
  if (a.k_before) cfg.sched.k_before = *a.k_before;
  if (a.k_after) cfg.sched.k_after = *a.k_after;
  if (a.k_switch) cfg.sched.k_switch_step = *a.k_switch;

  auto utts = corpus::load_corpus(a.corpus_dir);
  training::TrainState state =
      training::train(cfg, utts, a.steps, a.out_dir, a.resume);
  std::cout << "trained to step " << state.step << "; final recon_l2 "
            << state.history.back().second.recon_l2 << "\n";
  return 0;
}

struct SynthArgs {
  std::string ckpt;
  std::string text;
  std::string z_file;
  std::string ref_file;
  std::optional<std::uint64_t> prior_seed;
  std::string out_dir;
  std::string name = "synth";
  std::int64_t max_frames = 1000;
  bool wav = false;
};

int run_synth(const SynthArgs& a) {
  const int sources = (!a.z_file.empty() ? 1 : 0) +
                      (!a.ref_file.empty() ? 1 : 0) +
                      (a.prior_seed.has_value() ? 1 : 0);
  if (sources != 1) {
    throw UsageError("exactly one of --z, --ref, --prior-seed is required");
  }
  model::Checkpoint ckpt = model::load_checkpoint(a.ckpt);
  const auto ids = tokenize_text(a.text);

  style::StyleVector z;
  if (!a.z_file.empty()) {
    z = style::read_style_vector(a.z_file, ckpt.cfg.latent_dim);
  } else if (!a.ref_file.empty()) {
    Rng rng(0);
    z = style::infer_style(audio::mel_read(a.ref_file), ckpt.cfg, ckpt.params,
                           style::InferMode::kMean, rng);
  } else {
    Rng rng(*a.prior_seed);
    z = style::sample_prior(rng, ckpt.cfg.latent_dim);
  }

  model::DecoderOutput out = model::forward_inference(
      ids, z.values, ckpt.cfg, ckpt.params, a.max_frames);
  audio::MelSpectrogram mel =
      model::model_domain_to_mel(ckpt.cfg, out.mel_after);

  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec) throw IoError("cannot create '" + a.out_dir + "'");
  const fs::path base = fs::path(a.out_dir) / a.name;
  audio::mel_write(base.string() + ".mel", mel);
  audio::pgm_write(base.string() + ".pgm", mel);
  style::append_stats_row((fs::path(a.out_dir) / "stats.tsv").string(), a.name,
                          style::probe_stats(mel));
  if (a.wav) {
    const auto fb = audio::make_mel_filterbank();
    const auto lin = audio::mel_to_linear(mel, fb);
    audio::Waveform w =
        audio::griffin_lim(lin, mel.frames, audio::kNfft, 60);
    double peak = 0.0;
    for (double s : w.samples) peak = std::max(peak, std::abs(s));
    if (peak > 0.0) {
      for (auto& s : w.samples) s *= 0.95 / std::max(peak, 0.95);
    }
    audio::wav_write(base.string() + ".wav", w);
  }
  std::cout << "synthesized " << mel.frames << " frames"
            << (out.truncated ? " (truncated at max-frames)" : "") << " -> "
            << base.string() << ".mel\n";
  return 0;
}

int run_style_interp(const std::string& a_path, const std::string& b_path,
                     double alpha, const std::string& out) {
  auto za = style::read_style_vector(a_path);
  auto zb = style::read_style_vector(b_path);
  if (za.dim() != zb.dim()) {
    throw ParseError("vector files have different lengths: " +
                     std::to_string(za.dim()) + " vs " +
                     std::to_string(zb.dim()));
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw UsageError("--alpha must lie in [0, 1]");
  }
  style::write_style_vector(out, style::interpolate(za, zb, alpha));
  return 0;
}

int run_style_setdim(const std::string& in, std::int64_t dim, double value,
                     const std::string& out) {
  auto z = style::read_style_vector(in);
  if (dim < 0 || dim >= z.dim()) {
    throw UsageError("--dim must lie in [0, " + std::to_string(z.dim()) + ")");
  }
  style::write_style_vector(out, style::set_dimension(z, dim, value));
  return 0;
}

int run_style_combine(const std::string& a_path, const std::string& b_path,
                      const std::string& out) {
  auto za = style::read_style_vector(a_path);
  auto zb = style::read_style_vector(b_path);
  if (za.dim() != zb.dim()) {
    throw ParseError("vector files have different lengths: " +
                     std::to_string(za.dim()) + " vs " +
                     std::to_string(zb.dim()));
  }
  style::write_style_vector(out, style::combine(za, zb));
  return 0;
}

int run_diag(const std::string& history) {
  const auto rows = training::read_history(history);
  std::cout << training::format_diag(training::diagnose(rows));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vstyle: latent style control for a desk-scale TTS model"};
  app.require_subcommand(1);

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus",
                                 "generate a synthetic style-labeled corpus");
  std::string gen_out;
  std::int64_t gen_n = 0;
  std::uint64_t gen_seed = 1234;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--n", gen_n, "number of utterances")->required();
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "rng seed");

  // train
  auto* tr = app.add_subcommand("train", "run the optimization loop");
  TrainArgs ta;
  tr->add_option("--corpus", ta.corpus_dir, "corpus directory")->required();
  tr->add_option("--config", ta.config_file, "key=value config file");
  tr->add_option("--steps", ta.steps, "number of steps")->required();
  tr->add_option("--out", ta.out_dir, "output directory")->required();
  tr->add_option("--resume", ta.resume, "checkpoint directory to resume from");
  double tr_lr = 0.0;
  auto* tr_lr_opt = tr->add_option("--lr", tr_lr, "learning rate");
  std::uint64_t tr_seed = 0;
  auto* tr_seed_opt = tr->add_option("--seed", tr_seed, "rng seed");
  std::int64_t tr_batch = 0, tr_ckpt_every = 0;
  auto* tr_batch_opt = tr->add_option("--batch-size", tr_batch, "batch size");
  auto* tr_ck_opt =
      tr->add_option("--checkpoint-every", tr_ckpt_every, "checkpoint cadence");
  std::int64_t s0 = 0, s1 = 0, kb = 0, ka = 0, ks = 0;
  auto* o0 = tr->add_option("--kl-ramp-start", s0, "KL weight ramp start step");
  auto* o1 = tr->add_option("--kl-ramp-end", s1, "KL weight ramp end step");
  auto* ob = tr->add_option("--k-before", kb,
                            "KL gate period before the switch (default 100)");
  auto* oa = tr->add_option("--k-after", ka,
                            "KL gate period after the switch (default 400)");
  auto* os = tr->add_option("--k-switch", ks,
                            "gate switch step (default 15000)");

  // synth
  auto* sy = app.add_subcommand("synth", "synthesize a mel spectrogram");
  SynthArgs sa;
  sy->add_option("--ckpt", sa.ckpt, "checkpoint directory")->required();
  sy->add_option("--text", sa.text, "input text")->required();
  sy->add_option("--z", sa.z_file, "style vector file");
  sy->add_option("--ref", sa.ref_file, "reference MEL1 file");
  std::uint64_t prior_seed = 0;
  auto* prior_opt =
      sy->add_option("--prior-seed", prior_seed, "sample z from the prior");
  sy->add_option("--out", sa.out_dir, "output directory")->required();
  sy->add_option("--name", sa.name, "output stem (default 'synth')");
  sy->add_option("--max-frames", sa.max_frames, "decode frame cap");
  sy->add_flag("--wav", sa.wav, "also invert to audio via Griffin-Lim");

  // style
  auto* st = app.add_subcommand("style", "latent-vector arithmetic");
  st->require_subcommand(1);
  auto* si = st->add_subcommand("interp", "alpha*a + (1-alpha)*b");
  std::string st_a, st_b, st_in, st_out;
  double st_alpha = 0.5, st_value = 0.0;
  std::int64_t st_dim = 0;
  si->add_option("--a", st_a, "vector file a")->required();
  si->add_option("--b", st_b, "vector file b")->required();
  si->add_option("--alpha", st_alpha, "interpolation coefficient")->required();
  si->add_option("--out", st_out, "output vector file")->required();
  auto* sd = st->add_subcommand("setdim", "replace one coordinate");
  sd->add_option("--in", st_in, "input vector file")->required();
  sd->add_option("--dim", st_dim, "dimension index")->required();
  sd->add_option("--value", st_value, "new value")->required();
  sd->add_option("--out", st_out, "output vector file")->required();
  auto* sc = st->add_subcommand("combine", "element-wise sum");
  sc->add_option("--a", st_a, "vector file a")->required();
  sc->add_option("--b", st_b, "vector file b")->required();
  sc->add_option("--out", st_out, "output vector file")->required();

  // diag
  auto* dg = app.add_subcommand("diag", "KL-collapse diagnostic over history");
  std::string dg_history;
  dg->add_option("--history", dg_history, "history.tsv path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (gen->parsed()) {
      return run_gen_corpus(gen_out, gen_n,
                            seed_or_env(gen_seed_opt, gen_seed, 1234));
    }
    if (tr->parsed()) {
      if (tr_lr_opt->count()) ta.lr = tr_lr;
      if (tr_seed_opt->count()) {
        ta.seed = tr_seed;
      } else if (const char* env = std::getenv("STYLE_TTS_SEED")) {
        ta.seed = std::strtoull(env, nullptr, 10);
      }
      if (tr_batch_opt->count()) ta.batch_size = tr_batch;
      if (tr_ck_opt->count()) ta.checkpoint_every = tr_ckpt_every;
      if (o0->count()) ta.kl_ramp_start = s0;
      if (o1->count()) ta.kl_ramp_end = s1;
      if (ob->count()) ta.k_before = kb;
      if (oa->count()) ta.k_after = ka;
      if (os->count()) ta.k_switch = ks;
      return run_train(ta);
    }
    if (sy->parsed()) {
      if (prior_opt->count()) sa.prior_seed = prior_seed;
      return run_synth(sa);
    }
    if (st->parsed()) {
      if (si->parsed()) return run_style_interp(st_a, st_b, st_alpha, st_out);
      if (sd->parsed()) return run_style_setdim(st_in, st_dim, st_value, st_out);
      if (sc->parsed()) return run_style_combine(st_a, st_b, st_out);
    }
    if (dg->parsed()) return run_diag(dg_history);
    std::cerr << "no subcommand\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const VocabError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ContractError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    // IoError, ParseError, ConfigError, ShapeError
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}
