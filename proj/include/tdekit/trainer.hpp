#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tdekit/augment.hpp"
#include "tdekit/embedder.hpp"
#include "tdekit/estimator.hpp"
#include "tdekit/manifest.hpp"

namespace tde {

enum class LossKind { Crw, Zero, MonoClr };

LossKind parse_loss_kind(const std::string& name);
std::string loss_kind_name(LossKind k);

/// Held-out validation: simulated scenes with known delays, scored by the
/// estimator. Training selects checkpoints on this MAE, not on loss value.
struct HeldoutConfig {
  int scenes = 40;
  int room = 1;
  double snr_db = 10.0;
  double rt60 = 0.1;
  double duration_s = 0.09;  // rendered length; the center clip_len is used
  int eval_step = 2;
  Aggregation agg = Aggregation::ModeRansac;
  VoteMode vote_mode = VoteMode::Expectation;
};

struct TrainConfig {
  LossKind loss = LossKind::Crw;
  double lr = 1e-4;
  int batch = 8;
  double temperature = 0.05;
  int window = 1024;
  int step = 4;
  int clip_len = 1220;
  int max_steps = 1000;
  int eval_interval = 50;
  int patience = 5;          // evals without improvement before stopping
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  ArchConfig arch;
  AugmentConfig aug;         // augmented-side policy
  // Optional coarse-to-fine schedule: pretrain_steps at pretrain_window
  // before the main run. Off by default.
  int pretrain_steps = 0;
  int pretrain_window = 7680;
  int pretrain_clip_len = 8192;
  HeldoutConfig heldout;
  int checkpoint_interval = 0;  // 0 = every eval_interval

  void validate() const;
};

/// key=value configuration file; unknown keys are an error.
TrainConfig load_train_config(const std::string& path);

struct OptState {
  std::vector<std::vector<double>> m;  // first moments, aligned with params
  std::vector<std::vector<double>> v;  // second moments
  long step_count = 0;
};

OptState make_opt_state(const ModelParams& params);

/// One AdamW update: decoupled weight decay (params *= 1 - lr*wd) before the
/// bias-corrected moment step. Returns false and leaves params, moments and
/// the step counter untouched when any gradient value is non-finite.
bool adamw_step(ModelParams& params, const Grads& grads, OptState& state, double lr,
                double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
                double weight_decay = 0.0);

/// Half-cosine decay: base * (1 + cos(pi * step / total)) / 2.
double cosine_lr(long step, long total, double base);

struct Corpus {
  std::vector<StereoClip> clips;
};

/// Loads training audio from a scene manifest (rows are rendered) or from a
/// directory of stereo WAV files.
Corpus load_corpus(const std::string& path);

/// Returns held-out MAE in milliseconds for the given parameters.
using HeldoutEvalFn = std::function<double(const ModelParams&)>;

/// The built-in held-out evaluator: renders cfg.heldout scenes once and
/// scores estimate_delay against the exact delays.
HeldoutEvalFn make_heldout_eval(const TrainConfig& cfg);

struct TrainResult {
  ModelParams best_params;
  double init_heldout_mae_ms = 0.0;
  double best_heldout_mae_ms = 0.0;
  long steps_run = 0;
  int skipped_steps = 0;  // non-finite gradient steps that were skipped
  std::string best_checkpoint_path;
};

/// Full optimization loop; writes init.tdk, periodic ckpt_<step>.tdk,
/// best.tdk and metrics.csv under out_dir. Deterministic in (config, corpus).
TrainResult train(const TrainConfig& cfg, const Corpus& corpus, const std::string& out_dir,
                  HeldoutEvalFn heldout_eval = nullptr);

}  // namespace tde
