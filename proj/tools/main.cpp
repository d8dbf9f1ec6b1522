// tdekit command line: dataset simulation, training, evaluation, robustness
// sweeps and single-file delay estimation.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tdekit/bench.hpp"
#include "tdekit/trainer.hpp"

namespace fs = std::filesystem;
using namespace tde;

namespace {

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::string cur;
  std::istringstream is(csv);
  while (std::getline(is, cur, ',')) out.push_back(std::stod(cur));
  return out;
}

std::vector<int> parse_room_list(const std::string& csv) {
  std::vector<int> out;
  std::string cur;
  std::istringstream is(csv);
  while (std::getline(is, cur, ',')) out.push_back(std::stoi(cur));
  return out;
}

struct SimulateArgs {
  std::string out;
  std::string rooms = "1,2,3";
  std::string snrs = "10";
  std::string rt60s = "0.1";
  int count = 10;
  int sources = 1;
  double duration = 0.5;
  std::string signal = "speechlike";
  bool no_audio = false;
  std::uint64_t seed = 0;
};

int run_simulate(const SimulateArgs& a) {
  SimGrid grid;
  grid.rooms = parse_room_list(a.rooms);
  grid.snrs = parse_double_list(a.snrs);
  grid.rt60s = parse_double_list(a.rt60s);
  grid.count_per_cell = a.count;
  grid.sources = a.sources;
  grid.duration_s = a.duration;
  grid.signal = a.signal;
  grid.write_wavs = !a.no_audio;
  const auto rows = gen_dataset(grid, a.seed, a.out);
  std::cout << "wrote " << rows.size() << " scenes to " << a.out << "/manifest.txt\n";
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string corpus;
  std::string out = "train_out";
  std::string heldout;  // optional manifest; default simulated held-out set
  std::optional<std::uint64_t> seed;
};

int run_train(const TrainArgs& a) {
  TrainConfig cfg = a.config.empty() ? TrainConfig{} : load_train_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  const Corpus corpus = load_corpus(a.corpus);

  HeldoutEvalFn eval_fn;
  if (!a.heldout.empty()) {
    const auto rows = read_manifest(a.heldout);
    const std::string dir = fs::path(a.heldout).parent_path().string();
    auto items = std::make_shared<std::vector<std::pair<StereoClip, double>>>();
    for (const auto& row : rows) {
      require(!row.tau_ms.empty(), "train: held-out manifest row lacks ground truth");
      StereoClip clip = row_audio(row, dir);
      if (clip.size() > static_cast<std::size_t>(cfg.clip_len))
        clip = crop_center(clip, static_cast<std::size_t>(cfg.clip_len));
      items->emplace_back(std::move(clip), row.tau_ms[0] / 1000.0);
    }
    EstimateConfig est;
    est.window = cfg.window;
    est.step = cfg.heldout.eval_step;
    est.agg = cfg.heldout.agg;
    est.vote_mode = cfg.heldout.vote_mode;
    est.temperature = cfg.temperature;
    eval_fn = [items, est](const ModelParams& params) {
      double acc = 0;
      for (const auto& [clip, tau] : *items)
        acc += std::abs(estimate_delay(params, clip, est).delay_s - tau);
      return acc / static_cast<double>(items->size()) * 1000.0;
    };
  }

  const TrainResult r = train(cfg, corpus, a.out, eval_fn);
  std::cout << "init held-out MAE " << r.init_heldout_mae_ms << " ms\n";
  std::cout << "best held-out MAE " << r.best_heldout_mae_ms << " ms after " << r.steps_run
            << " steps\n";
  std::cout << "best checkpoint: " << r.best_checkpoint_path << "\n";
  return 0;
}

struct EvalArgs {
  std::string manifest;
  std::string method = "gcc";
  std::string checkpoint;
  std::string agg = "mean";
  std::string vote_mode = "expectation";
  int votes = 128;
  int window = 1024;
  int step = 1;
  int context = 0;
  double max_delay_ms = 0;
  std::string out;
  std::uint64_t seed = 0;
};

EvalConfig eval_config_from_args(const EvalArgs& a) {
  EvalConfig cfg;
  cfg.method = parse_method(a.method);
  cfg.checkpoint = a.checkpoint;
  cfg.votes = a.votes;
  cfg.window = a.window;
  cfg.model_step = a.step;
  cfg.agg = a.agg == "mode" ? Aggregation::ModeRansac : Aggregation::Mean;
  cfg.vote_mode = a.vote_mode == "argmax" ? VoteMode::Argmax : VoteMode::Expectation;
  cfg.context = a.context;
  cfg.max_delay_s = a.max_delay_ms / 1000.0;
  cfg.seed = a.seed;
  return cfg;
}

int run_eval(const EvalArgs& a) {
  const EvalConfig cfg = eval_config_from_args(a);
  const EvalReport report = evaluate(cfg, a.manifest);
  std::cout << method_label(cfg) << ": MAE " << report.mae_ms << " ms, RMSE " << report.rmse_ms
            << " ms, LR accuracy " << report.lr_accuracy << " (n=" << report.n << ")\n";
  if (!a.out.empty()) {
    write_report_csv(report, a.out);
    std::cout << "wrote " << a.out << "\n";
  }
  return 0;
}

struct SweepArgs {
  std::string axis = "snr";
  std::string values;
  std::string methods = "gcc";
  std::string checkpoint;
  std::string rooms = "1,2,3";
  int count = 60;
  double duration = 0.5;
  std::string out;
  std::uint64_t seed = 0;
};

int run_sweep(const SweepArgs& a) {
  SweepConfig cfg;
  cfg.axis = parse_sweep_axis(a.axis);
  if (!a.values.empty()) cfg.values = parse_double_list(a.values);
  cfg.rooms = parse_room_list(a.rooms);
  cfg.count = a.count;
  cfg.duration_s = a.duration;
  cfg.seed = a.seed;

  std::string cur;
  std::istringstream is(a.methods);
  while (std::getline(is, cur, ',')) {
    EvalConfig m;
    m.method = parse_method(cur);
    if (m.method == Method::Model) {
      require(!a.checkpoint.empty(), "sweep: the model method needs --checkpoint");
      m.checkpoint = a.checkpoint;
      m.agg = Aggregation::ModeRansac;
    }
    cfg.methods.push_back(m);
  }

  const auto points = sweep(cfg);
  for (const auto& p : points)
    std::cout << a.axis << "=" << p.condition << " " << p.method << ": MAE " << p.report.mae_ms
              << " ms, RMSE " << p.report.rmse_ms << " ms\n";
  if (!a.out.empty()) {
    write_sweep_csv(points, a.out);
    std::cout << "wrote " << a.out << "\n";
  }
  return 0;
}

struct EstimateArgs {
  std::string input;
  std::string method = "gcc";
  std::string checkpoint;
  std::string agg = "mean";
  std::string vote_mode = "expectation";
  int votes = 128;
  int window = 1024;
  int step = 1;
  double max_delay_ms = 26.0 / 16.0;  // fallback lag range at 16 kHz
  double mic_distance = 0;            // enables angle output when set
};

int run_estimate(const EstimateArgs& a) {
  const StereoClip clip = load_wav_stereo(a.input);
  DelayEstimate est;
  const Aggregation agg = a.agg == "mode" ? Aggregation::ModeRansac : Aggregation::Mean;
  const int max_lag = static_cast<int>(std::ceil(a.max_delay_ms / 1000.0 * clip.rate()));

  const Method method = parse_method(a.method);
  if (method == Method::Gcc) {
    est = classic_estimate(clip, a.votes, a.window, agg, max_lag);
  } else if (method == Method::Model) {
    require(!a.checkpoint.empty(), "estimate: the model method needs --checkpoint");
    const ModelParams params = load_checkpoint(a.checkpoint);
    EstimateConfig cfg;
    cfg.window = a.window;
    cfg.step = a.step;
    cfg.agg = agg;
    cfg.vote_mode = a.vote_mode == "argmax" ? VoteMode::Argmax : VoteMode::Expectation;
    cfg.max_delay_s = a.max_delay_ms / 1000.0;
    cfg.max_votes = a.votes;
    est = estimate_delay(params, clip, cfg);
  } else if (method == Method::Iid) {
    est.method = "iid";
    est.delay_s = 0;
    est.votes = {0.0};
    std::cout << "{\"direction\":\""
              << (iid_direction(clip) == Direction::Right ? "right" : "left") << "\"}\n";
    return 0;
  } else {
    fail("estimate: method must be gcc, model or iid");
  }
  if (a.mic_distance > 0) est.angle_deg = delay_to_angle(est.delay_s, a.mic_distance);
  std::cout << to_json(est) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tdekit: stereo time delay estimation toolkit"};
  app.require_subcommand(1);

  SimulateArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "Generate a labeled simulated dataset");
  sim->add_option("--out", sim_args.out, "Output directory")->required();
  sim->add_option("--rooms", sim_args.rooms, "Room presets, e.g. 1,2,3");
  sim->add_option("--snr", sim_args.snrs, "SNR grid in dB, e.g. 10,20 (inf for noiseless)");
  sim->add_option("--rt60", sim_args.rt60s, "RT60 grid in seconds, e.g. 0.1,0.5");
  sim->add_option("--count", sim_args.count, "Scenes per (room, snr, rt60) cell");
  sim->add_option("--sources", sim_args.sources, "Sources per scene");
  sim->add_option("--duration", sim_args.duration, "Source duration in seconds");
  sim->add_option("--signal", sim_args.signal, "Source kind: speechlike or white");
  sim->add_flag("--no-audio", sim_args.no_audio, "Skip WAV rendering (manifest only)");
  sim->add_option("--seed", sim_args.seed, "Random seed");

  TrainArgs train_args;
  auto* tr = app.add_subcommand("train", "Train a self-supervised embedding model");
  tr->add_option("--config", train_args.config, "key=value training configuration file");
  tr->add_option("--corpus", train_args.corpus, "Scene manifest or WAV directory")->required();
  tr->add_option("--out", train_args.out, "Output directory for checkpoints and metrics");
  tr->add_option("--heldout", train_args.heldout, "Held-out manifest (default: simulated)");
  std::uint64_t train_seed = 0;
  auto* seed_opt = tr->add_option("--seed", train_seed, "Override the config seed");

  EvalArgs eval_args;
  auto* ev = app.add_subcommand("eval", "Evaluate a method on a dataset manifest");
  ev->add_option("--manifest", eval_args.manifest, "Dataset manifest")->required();
  ev->add_option("--method", eval_args.method, "gcc | model | iid | random");
  ev->add_option("--checkpoint", eval_args.checkpoint, "Model checkpoint (.tdk)");
  ev->add_option("--agg", eval_args.agg, "Vote aggregation: mean | mode");
  ev->add_option("--vote-mode", eval_args.vote_mode, "argmax | expectation");
  ev->add_option("--votes", eval_args.votes, "Votes per clip");
  ev->add_option("--window", eval_args.window, "Per-vote window in samples");
  ev->add_option("--step", eval_args.step, "Model sliding-window step");
  ev->add_option("--context", eval_args.context, "Center-crop clips to this many samples");
  ev->add_option("--max-delay-ms", eval_args.max_delay_ms, "Search range (default: geometry)");
  ev->add_option("--out", eval_args.out, "Write the per-clip CSV report here");
  ev->add_option("--seed", eval_args.seed, "Seed for the random baseline");

  SweepArgs sweep_args;
  auto* sw = app.add_subcommand("sweep", "Robustness sweep over snr, rt60 or mixture");
  sw->add_option("--axis", sweep_args.axis, "snr | rt60 | mixture")->required();
  sw->add_option("--values", sweep_args.values, "Condition grid (default per axis)");
  sw->add_option("--methods", sweep_args.methods, "Comma list: gcc,model,iid,random");
  sw->add_option("--checkpoint", sweep_args.checkpoint, "Checkpoint for the model method");
  sw->add_option("--rooms", sweep_args.rooms, "Room presets");
  sw->add_option("--count", sweep_args.count, "Scenes per condition");
  sw->add_option("--duration", sweep_args.duration, "Input duration in seconds");
  sw->add_option("--out", sweep_args.out, "Write the sweep CSV here");
  sw->add_option("--seed", sweep_args.seed, "Random seed");

  EstimateArgs est_args;
  auto* es = app.add_subcommand("estimate", "Estimate the delay of one stereo WAV file");
  es->add_option("--input", est_args.input, "Stereo WAV file")->required();
  es->add_option("--method", est_args.method, "gcc | model | iid");
  es->add_option("--checkpoint", est_args.checkpoint, "Model checkpoint (.tdk)");
  es->add_option("--agg", est_args.agg, "mean | mode");
  es->add_option("--vote-mode", est_args.vote_mode, "argmax | expectation");
  es->add_option("--votes", est_args.votes, "Number of votes");
  es->add_option("--window", est_args.window, "Per-vote window in samples");
  es->add_option("--step", est_args.step, "Model sliding-window step");
  es->add_option("--max-delay-ms", est_args.max_delay_ms, "Search range in milliseconds");
  es->add_option("--mic-distance", est_args.mic_distance, "Mic spacing in meters (adds angle)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exits 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;  // usage errors map to exit code 1
  }

  try {
    if (*sim) return run_simulate(sim_args);
    if (*tr) {
      if (*seed_opt) train_args.seed = train_seed;
      return run_train(train_args);
    }
    if (*ev) return run_eval(eval_args);
    if (*sw) return run_sweep(sweep_args);
    if (*es) return run_estimate(est_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
