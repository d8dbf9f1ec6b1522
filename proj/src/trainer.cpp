#include "tdekit/trainer.hpp"

#include "tdekit/gcc.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace tde {

namespace fs = std::filesystem;

LossKind parse_loss_kind(const std::string& name) {
  if (name == "crw") return LossKind::Crw;
  if (name == "zero") return LossKind::Zero;
  if (name == "monoclr") return LossKind::MonoClr;
  fail("unknown loss '" + name + "' (expected crw, zero or monoclr)");
}

std::string loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::Crw: return "crw";
    case LossKind::Zero: return "zero";
    case LossKind::MonoClr: return "monoclr";
  }
  return "?";
}

void TrainConfig::validate() const {
  require(lr >= 0, "TrainConfig: negative learning rate");
  require(batch >= 1, "TrainConfig: batch must be positive");
  require(temperature > 0, "TrainConfig: temperature must be positive");
  require(window >= 256 && step >= 1, "TrainConfig: bad window/step");
  require(clip_len >= window + step, "TrainConfig: clip_len too short for one window");
  require(max_steps >= 1, "TrainConfig: max_steps must be positive");
  require(eval_interval >= 1 && patience >= 1, "TrainConfig: bad eval interval or patience");
  require(weight_decay >= 0, "TrainConfig: negative weight decay");
  arch.validate();
  aug.validate();
  if (loss == LossKind::MonoClr) {
    require(aug.shift, "TrainConfig: the monoclr loss requires time-shift augmentation");
    require(aug.shift_quantum % step == 0 && aug.shift_quantum >= step,
            "TrainConfig: monoclr shifts must be multiples of the window step");
  } else {
    require(!aug.shift, "TrainConfig: time-shift augmentation is only supported for monoclr");
  }
  if (pretrain_steps > 0) {
    require(pretrain_window >= 256 && pretrain_clip_len >= pretrain_window + step,
            "TrainConfig: bad pretrain window/clip length");
  }
  require(heldout.scenes >= 1, "TrainConfig: need at least one held-out scene");
  require(heldout.duration_s * 16000.0 >= clip_len, "TrainConfig: held-out scenes shorter than clip_len");
}

// ---------------------------------------------------------------------------
// Config files
// ---------------------------------------------------------------------------

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail("config: bad boolean for " + key + ": '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& v) {
  std::vector<int> out;
  std::string cur;
  std::istringstream is(v);
  while (std::getline(is, cur, ',')) out.push_back(std::stoi(cur));
  return out;
}

Aggregation parse_agg(const std::string& v) {
  if (v == "mean") return Aggregation::Mean;
  if (v == "mode") return Aggregation::ModeRansac;
  fail("config: unknown aggregation '" + v + "' (expected mean or mode)");
}

VoteMode parse_vote_mode(const std::string& v) {
  if (v == "argmax") return VoteMode::Argmax;
  if (v == "expectation") return VoteMode::Expectation;
  fail("config: unknown vote mode '" + v + "' (expected argmax or expectation)");
}

}  // namespace

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "load_train_config: cannot open '" + path + "'");
  TrainConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // trim
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    const auto eq = line.find('=');
    require(eq != std::string::npos,
            "load_train_config: line " + std::to_string(lineno) + " is not key=value");
    auto trim = [](std::string s) {
      const auto b2 = s.find_first_not_of(" \t");
      const auto e2 = s.find_last_not_of(" \t");
      return b2 == std::string::npos ? std::string() : s.substr(b2, e2 - b2 + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));

    if (key == "loss") c.loss = parse_loss_kind(val);
    else if (key == "lr") c.lr = std::stod(val);
    else if (key == "batch") c.batch = std::stoi(val);
    else if (key == "temperature") c.temperature = std::stod(val);
    else if (key == "window") c.window = std::stoi(val);
    else if (key == "step") c.step = std::stoi(val);
    else if (key == "clip_len") c.clip_len = std::stoi(val);
    else if (key == "max_steps") c.max_steps = std::stoi(val);
    else if (key == "eval_interval") c.eval_interval = std::stoi(val);
    else if (key == "patience") c.patience = std::stoi(val);
    else if (key == "weight_decay") c.weight_decay = std::stod(val);
    else if (key == "seed") c.seed = std::stoull(val);
    else if (key == "checkpoint_interval") c.checkpoint_interval = std::stoi(val);
    else if (key == "pretrain_steps") c.pretrain_steps = std::stoi(val);
    else if (key == "pretrain_window") c.pretrain_window = std::stoi(val);
    else if (key == "pretrain_clip_len") c.pretrain_clip_len = std::stoi(val);
    else if (key == "arch.channels") c.arch.channels = parse_int_list(val);
    else if (key == "arch.strides") c.arch.strides = parse_int_list(val);
    else if (key == "arch.convs_per_block") c.arch.convs_per_block = std::stoi(val);
    else if (key == "arch.embed_dim") c.arch.embed_dim = std::stoi(val);
    else if (key == "aug.swap") c.aug.swap = parse_bool(val, key);
    else if (key == "aug.swap_p") c.aug.swap_p = std::stod(val);
    else if (key == "aug.scale") c.aug.scale = parse_bool(val, key);
    else if (key == "aug.scale_lo") c.aug.scale_lo = std::stod(val);
    else if (key == "aug.scale_hi") c.aug.scale_hi = std::stod(val);
    else if (key == "aug.shift") c.aug.shift = parse_bool(val, key);
    else if (key == "aug.shift_bound") c.aug.shift_bound = std::stoi(val);
    else if (key == "aug.shift_quantum") c.aug.shift_quantum = std::stoi(val);
    else if (key == "aug.noise") c.aug.noise = parse_bool(val, key);
    else if (key == "aug.noise_snr_lo") c.aug.noise_snr_lo = std::stod(val);
    else if (key == "aug.noise_snr_hi") c.aug.noise_snr_hi = std::stod(val);
    else if (key == "aug.reverb") c.aug.reverb = parse_bool(val, key);
    else if (key == "aug.rt60_lo") c.aug.reverb_rt60_lo = std::stod(val);
    else if (key == "aug.rt60_hi") c.aug.reverb_rt60_hi = std::stod(val);
    else if (key == "aug.mixture") c.aug.mixture = parse_bool(val, key);
    else if (key == "aug.mixture_lo") c.aug.mixture_lo = std::stod(val);
    else if (key == "aug.mixture_hi") c.aug.mixture_hi = std::stod(val);
    else if (key == "heldout.scenes") c.heldout.scenes = std::stoi(val);
    else if (key == "heldout.room") c.heldout.room = std::stoi(val);
    else if (key == "heldout.snr_db") c.heldout.snr_db = std::stod(val);
    else if (key == "heldout.rt60") c.heldout.rt60 = std::stod(val);
    else if (key == "heldout.duration_s") c.heldout.duration_s = std::stod(val);
    else if (key == "heldout.eval_step") c.heldout.eval_step = std::stoi(val);
    else if (key == "heldout.agg") c.heldout.agg = parse_agg(val);
    else if (key == "heldout.vote_mode") c.heldout.vote_mode = parse_vote_mode(val);
    else fail("load_train_config: unknown key '" + key + "' at line " + std::to_string(lineno));
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

OptState make_opt_state(const ModelParams& params) {
  OptState s;
  s.m = zeros_like(params);
  s.v = zeros_like(params);
  return s;
}

bool adamw_step(ModelParams& params, const Grads& grads, OptState& state, double lr, double beta1,
                double beta2, double eps, double weight_decay) {
  require(grads.size() == params.blocks.size() && state.m.size() == params.blocks.size(),
          "adamw_step: shape mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    require(grads[i].size() == params.blocks[i].count(), "adamw_step: shape mismatch");
    for (double g : grads[i])
      if (!std::isfinite(g)) return false;  // skip the step entirely
  }

  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto& p = params.blocks[i].v;
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      p[j] *= 1.0 - lr * weight_decay;  // decoupled decay before the moment step
      const double g = grads[i][j];
      m[j] = beta1 * m[j] + (1.0 - beta1) * g;
      v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
  return true;
}

double cosine_lr(long step, long total, double base) {
  require(total >= 1, "cosine_lr: total must be positive");
  const double x = std::min(1.0, std::max(0.0, static_cast<double>(step) / static_cast<double>(total)));
  return base * (1.0 + std::cos(3.14159265358979323846 * x)) / 2.0;
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

Corpus load_corpus(const std::string& path) {
  Corpus corpus;
  const fs::path p(path);
  require(fs::exists(p), "load_corpus: '" + path + "' does not exist");

  if (fs::is_directory(p)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(p))
      if (entry.is_regular_file() && entry.path().extension() == ".wav")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    require(!files.empty(), "load_corpus: no .wav files in '" + path + "'");
    for (const auto& f : files) corpus.clips.push_back(load_wav_stereo(f.string()));
    return corpus;
  }

  const auto rows = read_manifest(path);
  require(!rows.empty(), "load_corpus: empty manifest '" + path + "'");
  corpus.clips.resize(rows.size());
  const std::string dir = p.parent_path().string();
  parallel_chunks(rows.size(), [&](std::size_t i) { corpus.clips[i] = row_audio(rows[i], dir); });
  return corpus;
}

// ---------------------------------------------------------------------------
// Held-out evaluation
// ---------------------------------------------------------------------------

HeldoutEvalFn make_heldout_eval(const TrainConfig& cfg) {
  struct Item {
    StereoClip clip;
    double tau_s;
  };
  auto items = std::make_shared<std::vector<Item>>();
  const RoomConfig room_base = room_preset(cfg.heldout.room);
  const std::uint64_t base = hash_combine(cfg.seed, 0x48454c44ULL);

  items->resize(static_cast<std::size_t>(cfg.heldout.scenes));
  std::vector<std::uint64_t> seeds(items->size());
  for (std::size_t i = 0; i < items->size(); ++i) seeds[i] = hash_combine(base, i);

  parallel_chunks(items->size(), [&](std::size_t i) {
    Rng rng(seeds[i]);
    Scene scene;
    scene.room = room_base;
    scene.room.rt60 = cfg.heldout.rt60;
    scene.snr_db = cfg.heldout.snr_db;
    scene.seed = seeds[i];
    SourceSpec spec;
    do {
      spec.angle_deg = rng.uniform(-90.0, 90.0);
      spec.distance_m = rng.uniform(0.5, 3.0);
    } while (!source_fits(scene.room, spec));
    scene.sources = {spec};

    const std::size_t n = static_cast<std::size_t>(std::llround(cfg.heldout.duration_s * 16000.0));
    const auto sig = speechlike_source(n, 16000.0, hash_combine(seeds[i], 0x736967ULL));
    RenderResult r = render_scene(scene, {sig});
    (*items)[i] = {crop_center(r.audio, static_cast<std::size_t>(cfg.clip_len)), r.tdoas[0]};
  });

  EstimateConfig est;
  est.window = cfg.window;
  est.step = cfg.heldout.eval_step;
  est.agg = cfg.heldout.agg;
  est.vote_mode = cfg.heldout.vote_mode;
  est.temperature = cfg.temperature;
  est.max_delay_s =
      static_cast<double>(default_max_lag(room_base.mic_spacing(), room_base.speed_of_sound, 16000.0)) /
      16000.0;

  return [items, est](const ModelParams& params) {
    double acc = 0.0;
    for (const auto& item : *items) {
      const DelayEstimate e = estimate_delay(params, item.clip, est);
      acc += std::abs(e.delay_s - item.tau_s);
    }
    return acc / static_cast<double>(items->size()) * 1000.0;  // ms
  };
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

struct ItemOutcome {
  double loss = 0.0;
  Grads grads;
};

// Of the stereo augmentations, swap and scale apply to the pair; noise,
// reverb and mixture go to the x2 channel only (the clean-x1 asymmetry).
ItemOutcome process_walk_item(const ModelParams& params, const TrainConfig& cfg,
                              const StereoClip& cropped, int window, std::uint64_t item_seed,
                              const std::vector<MonoClip>* mono_pool) {
  AugmentConfig pair_cfg;
  pair_cfg.swap = cfg.aug.swap;
  pair_cfg.swap_p = cfg.aug.swap_p;
  pair_cfg.scale = cfg.aug.scale;
  pair_cfg.scale_lo = cfg.aug.scale_lo;
  pair_cfg.scale_hi = cfg.aug.scale_hi;
  auto [pair, pair_rec] = pipeline(cropped, pair_cfg, Side::Augmented, item_seed);

  MonoClip x1 = std::move(pair.left);
  MonoClip x2 = std::move(pair.right);
  if (cfg.aug.noise || cfg.aug.reverb || cfg.aug.mixture) {
    AugmentConfig x2_cfg;
    x2_cfg.noise = cfg.aug.noise;
    x2_cfg.noise_snr_lo = cfg.aug.noise_snr_lo;
    x2_cfg.noise_snr_hi = cfg.aug.noise_snr_hi;
    x2_cfg.reverb = cfg.aug.reverb;
    x2_cfg.reverb_rt60_lo = cfg.aug.reverb_rt60_lo;
    x2_cfg.reverb_rt60_hi = cfg.aug.reverb_rt60_hi;
    x2_cfg.mixture = cfg.aug.mixture;
    x2_cfg.mixture_lo = cfg.aug.mixture_lo;
    x2_cfg.mixture_hi = cfg.aug.mixture_hi;
    auto [aug2, rec2] = pipeline(x2, x2_cfg, Side::Augmented, hash_combine(item_seed, 0x7832ULL),
                                 mono_pool);
    x2 = std::move(aug2);
  }

  auto f1 = forward(params, extract_windows(x1, window, cfg.step), cfg.step);
  auto f2 = forward(params, extract_windows(x2, window, cfg.step), cfg.step);
  const AffinityMatrix a12 = affinity(f1.embeddings, f2.embeddings, cfg.temperature);

  LossResult loss;
  if (cfg.loss == LossKind::Crw) {
    const AffinityMatrix a21 = affinity(f2.embeddings, f1.embeddings, cfg.temperature);
    loss = crw_loss(a12, a21);
  } else {
    loss = zero_loss(a12);
  }

  ItemOutcome out;
  out.loss = loss.value;
  out.grads = backward(*f1.tape, loss.grad_h1);
  grads_add_scaled(out.grads, backward(*f2.tape, loss.grad_h2), 1.0);
  return out;
}

ItemOutcome process_monoclr_item(const ModelParams& params, const TrainConfig& cfg,
                                 const StereoClip& cropped, int window, std::uint64_t item_seed,
                                 const std::vector<MonoClip>* mono_pool) {
  Rng rng(hash_combine(item_seed, 0x6368ULL));
  const MonoClip& mono = rng.bernoulli(0.5) ? cropped.right : cropped.left;

  auto [view, rec] = pipeline(mono, cfg.aug, Side::Augmented, item_seed, mono_pool);

  auto f1 = forward(params, extract_windows(mono, window, cfg.step), cfg.step);
  auto f2 = forward(params, extract_windows(view, window, cfg.step), cfg.step);
  const LossResult loss =
      monoclr_loss(f1.embeddings, f2.embeddings, rec.shift_samples, cfg.temperature);

  ItemOutcome out;
  out.loss = loss.value;
  out.grads = backward(*f1.tape, loss.grad_h1);
  grads_add_scaled(out.grads, backward(*f2.tape, loss.grad_h2), 1.0);
  return out;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Corpus& corpus, const std::string& out_dir,
                  HeldoutEvalFn heldout_eval) {
  cfg.validate();
  require(!corpus.clips.empty(), "train: empty corpus");
  const int max_clip_need = std::max(cfg.clip_len, cfg.pretrain_steps > 0 ? cfg.pretrain_clip_len : 0);
  for (const auto& c : corpus.clips)
    require(c.size() >= static_cast<std::size_t>(max_clip_need),
            "train: corpus clip shorter than clip_len");

  fs::create_directories(out_dir);
  std::ofstream metrics(fs::path(out_dir) / "metrics.csv");
  require(metrics.good(), "train: cannot write metrics log in '" + out_dir + "'");
  metrics << "step,loss,lr,heldout_mae_ms\n";
  metrics.precision(10);

  if (!heldout_eval) heldout_eval = make_heldout_eval(cfg);

  ModelParams params = init_model(cfg.arch, cfg.seed);
  save_checkpoint(params, (fs::path(out_dir) / "init.tdk").string());
  OptState opt = make_opt_state(params);

  std::vector<MonoClip> mono_pool;
  const std::vector<MonoClip>* pool_ptr = nullptr;
  if (cfg.aug.mixture) {
    mono_pool.reserve(corpus.clips.size());
    for (const auto& c : corpus.clips) mono_pool.push_back(c.left);
    pool_ptr = &mono_pool;
  }

  TrainResult result;
  result.init_heldout_mae_ms = heldout_eval(params);
  result.best_heldout_mae_ms = result.init_heldout_mae_ms;
  result.best_params = params;
  metrics << "0,,," << result.init_heldout_mae_ms << "\n";
  metrics.flush();

  Rng order_rng(hash_combine(cfg.seed, 0x6f726472ULL));
  const long total_steps = cfg.pretrain_steps + cfg.max_steps;
  const int ckpt_interval = cfg.checkpoint_interval > 0 ? cfg.checkpoint_interval : cfg.eval_interval;
  int evals_since_best = 0;

  for (long step = 1; step <= total_steps; ++step) {
    const bool pretrain = step <= cfg.pretrain_steps;
    const int window = pretrain ? cfg.pretrain_window : cfg.window;
    const int clip_len = pretrain ? cfg.pretrain_clip_len : cfg.clip_len;
    const double lr_t = cosine_lr(step - 1, total_steps, cfg.lr);

    double loss_acc = 0.0;
    Grads grads = zeros_like(params);
    for (int item = 0; item < cfg.batch; ++item) {
      const std::size_t pick = static_cast<std::size_t>(
          order_rng.uniform_int(0, static_cast<std::int64_t>(corpus.clips.size()) - 1));
      const std::uint64_t item_seed = hash_combine(hash_combine(cfg.seed, 0xb000 + step), item);
      Rng crop_rng(hash_combine(item_seed, 0x63726f70ULL));
      const StereoClip& full = corpus.clips[pick];
      const std::size_t off = static_cast<std::size_t>(
          crop_rng.uniform_int(0, static_cast<std::int64_t>(full.size()) - clip_len));
      const StereoClip cropped = crop(full, off, static_cast<std::size_t>(clip_len));

      const ItemOutcome out =
          cfg.loss == LossKind::MonoClr
              ? process_monoclr_item(params, cfg, cropped, window, item_seed, pool_ptr)
              : process_walk_item(params, cfg, cropped, window, item_seed, pool_ptr);
      loss_acc += out.loss;
      grads_add_scaled(grads, out.grads, 1.0 / cfg.batch);
    }
    const double loss_mean = loss_acc / cfg.batch;
    if (!std::isfinite(loss_mean))
      fail("train: non-finite loss at step " + std::to_string(step) + " (aborting; last lr " +
           std::to_string(lr_t) + ")");

    if (!adamw_step(params, grads, opt, lr_t, 0.9, 0.999, 1e-8, cfg.weight_decay)) {
      ++result.skipped_steps;
      metrics << step << "," << loss_mean << "," << lr_t << ",\n";
      continue;
    }

    bool evaluated = false;
    double mae = 0.0;
    if (step % cfg.eval_interval == 0 || step == total_steps) {
      mae = heldout_eval(params);
      evaluated = true;
      if (mae < result.best_heldout_mae_ms) {
        result.best_heldout_mae_ms = mae;
        result.best_params = params;
        evals_since_best = 0;
      } else {
        ++evals_since_best;
      }
    }
    metrics << step << "," << loss_mean << "," << lr_t << ",";
    if (evaluated) metrics << mae;
    metrics << "\n";
    metrics.flush();

    if (step % ckpt_interval == 0)
      save_checkpoint(params, (fs::path(out_dir) / ("ckpt_" + std::to_string(step) + ".tdk")).string());

    result.steps_run = step;
    if (evaluated && evals_since_best >= cfg.patience) break;
  }

  result.best_checkpoint_path = (fs::path(out_dir) / "best.tdk").string();
  save_checkpoint(result.best_params, result.best_checkpoint_path);
  return result;
}

}  // namespace tde
