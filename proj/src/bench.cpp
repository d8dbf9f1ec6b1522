#include "tdekit/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

namespace tde {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

namespace {

SourceSpec sample_source(const RoomConfig& room, Rng& rng) {
  SourceSpec spec;
  do {
    spec.angle_deg = rng.uniform(-90.0, 90.0);
    spec.distance_m = rng.uniform(0.5, 3.0);
  } while (!source_fits(room, spec));
  return spec;
}

}  // namespace

std::vector<ManifestRow> gen_dataset(const SimGrid& grid, std::uint64_t seed,
                                     const std::string& out_dir) {
  require(!grid.rooms.empty() && !grid.snrs.empty() && !grid.rt60s.empty(),
          "gen_dataset: empty grid axis");
  require(grid.count_per_cell >= 0, "gen_dataset: negative count");
  require(grid.sources >= 1, "gen_dataset: at least one source per scene");
  fs::create_directories(out_dir);
  if (grid.write_wavs) fs::create_directories(fs::path(out_dir) / "clips");

  std::vector<ManifestRow> rows;
  int id = 0;
  for (int room_id : grid.rooms)
    for (double snr : grid.snrs)
      for (double rt60 : grid.rt60s)
        for (int k = 0; k < grid.count_per_cell; ++k, ++id) {
          ManifestRow row;
          row.id = id;
          row.room_id = room_id;
          row.rt60 = rt60;
          row.snr_db = snr;
          row.seed = hash_combine(seed, static_cast<std::uint64_t>(id));
          row.signal = grid.signal;
          row.duration_s = grid.duration_s;
          row.rate = grid.rate;
          RoomConfig room = room_preset(room_id);
          Rng rng(hash_combine(row.seed, 0x706f7365ULL));
          for (int s = 0; s < grid.sources; ++s) row.sources.push_back(sample_source(room, rng));
          room.rt60 = rt60;
          for (const auto& src : row.sources)
            row.tau_ms.push_back(ground_truth_tdoa(room, src) * 1000.0);
          if (grid.write_wavs) {
            char name[32];
            std::snprintf(name, sizeof name, "clips/%06d.wav", id);
            row.wav = name;
          }
          rows.push_back(std::move(row));
        }

  if (grid.write_wavs) {
    parallel_chunks(rows.size(), [&](std::size_t i) {
      const RenderResult r = render_row(rows[i]);
      save_wav(r.audio, (fs::path(out_dir) / rows[i].wav).string(), WavFormat::Float32);
    });
  }
  write_manifest((fs::path(out_dir) / "manifest.txt").string(), rows);
  return rows;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

Method parse_method(const std::string& name) {
  if (name == "gcc") return Method::Gcc;
  if (name == "model") return Method::Model;
  if (name == "iid") return Method::Iid;
  if (name == "random") return Method::Random;
  fail("unknown method '" + name + "' (expected gcc, model, iid or random)");
}

std::string method_label(const EvalConfig& cfg) {
  const char* agg = cfg.agg == Aggregation::Mean ? "mean" : "mode";
  switch (cfg.method) {
    case Method::Gcc: return std::string("gcc/") + agg;
    case Method::Model: return std::string("model/") + agg;
    case Method::Iid: return "iid";
    case Method::Random: return "random";
  }
  return "?";
}

namespace {

struct EvalItem {
  int id = 0;
  StereoClip clip;
  double truth_s = 0;
  double max_delay_s = 0;
};

EvalReport evaluate_items(const EvalConfig& cfg, std::vector<EvalItem>& items) {
  require(!items.empty(), "evaluate: no clips");
  ModelParams params;
  if (cfg.method == Method::Model) {
    require(!cfg.checkpoint.empty(), "evaluate: the model method needs a checkpoint");
    params = load_checkpoint(cfg.checkpoint);
  }

  EvalReport report;
  report.rows.resize(items.size());

  parallel_chunks(items.size(), [&](std::size_t i) {
    EvalItem& item = items[i];
    if (cfg.context > 0 && item.clip.size() > static_cast<std::size_t>(cfg.context))
      item.clip = crop_center(item.clip, static_cast<std::size_t>(cfg.context));
    const double max_delay = cfg.max_delay_s > 0 ? cfg.max_delay_s : item.max_delay_s;
    const double rate = item.clip.rate();

    double pred_s = 0;
    switch (cfg.method) {
      case Method::Gcc: {
        const int max_lag = static_cast<int>(std::ceil(max_delay * rate));
        const DelayEstimate e =
            classic_estimate(item.clip, cfg.votes, cfg.window, cfg.agg, max_lag);
        pred_s = e.delay_s;
        break;
      }
      case Method::Model: {
        EstimateConfig est;
        est.window = cfg.window;
        est.step = cfg.model_step;
        est.agg = cfg.agg;
        est.vote_mode = cfg.vote_mode;
        est.temperature = cfg.temperature;
        est.max_delay_s = max_delay;
        est.max_votes = cfg.votes;
        pred_s = estimate_delay(params, item.clip, est).delay_s;
        break;
      }
      case Method::Iid:
        // Direction-only baseline; the magnitude is a nominal half range.
        pred_s = (iid_direction(item.clip) == Direction::Right ? 1.0 : -1.0) * 0.5 * max_delay;
        break;
      case Method::Random: {
        Rng rng(hash_combine(cfg.seed, static_cast<std::uint64_t>(item.id)));
        pred_s = rng.uniform(-max_delay, max_delay);
        break;
      }
    }
    report.rows[i] = {item.id, item.truth_s * 1000.0, pred_s * 1000.0,
                      std::abs(pred_s - item.truth_s) * 1000.0};
  });

  // One sample of dead zone at the (shared) clip rate.
  summarize(report, 1000.0 / items[0].clip.rate());
  return report;
}

double row_max_delay(const ManifestRow& row) {
  const RoomConfig room = room_preset(row.room_id);
  return static_cast<double>(default_max_lag(room.mic_spacing(), room.speed_of_sound, row.rate)) /
         row.rate;
}

}  // namespace

void summarize(EvalReport& report, double dead_zone_ms) {
  require(!report.rows.empty(), "summarize: no rows");
  double abs_acc = 0, sq_acc = 0;
  int lr_hits = 0, lr_n = 0;
  for (const EvalRow& row : report.rows) {
    abs_acc += row.abs_err_ms;
    sq_acc += (row.pred_ms - row.truth_ms) * (row.pred_ms - row.truth_ms);
    if (std::abs(row.truth_ms) >= dead_zone_ms) {
      ++lr_n;
      const int st = row.truth_ms > 0 ? 1 : -1;
      const int sp = row.pred_ms > 0 ? 1 : (row.pred_ms < 0 ? -1 : 0);
      if (st == sp) ++lr_hits;
    }
  }
  report.n = static_cast<int>(report.rows.size());
  report.mae_ms = abs_acc / report.n;
  report.rmse_ms = std::sqrt(sq_acc / report.n);
  report.lr_n = lr_n;
  report.lr_accuracy = lr_n > 0 ? static_cast<double>(lr_hits) / lr_n : 0.0;
}

EvalReport evaluate_rows(const EvalConfig& cfg, const std::vector<ManifestRow>& rows,
                         const std::string& manifest_dir) {
  require(!rows.empty(), "evaluate: empty manifest");
  std::vector<EvalItem> items(rows.size());
  parallel_chunks(rows.size(), [&](std::size_t i) {
    items[i].id = rows[i].id;
    items[i].clip = row_audio(rows[i], manifest_dir);
    require(!rows[i].tau_ms.empty(), "evaluate: manifest row lacks ground truth");
    items[i].truth_s = rows[i].tau_ms[0] / 1000.0;
    items[i].max_delay_s = row_max_delay(rows[i]);
  });
  return evaluate_items(cfg, items);
}

EvalReport evaluate(const EvalConfig& cfg, const std::string& manifest_path) {
  const auto rows = read_manifest(manifest_path);
  return evaluate_rows(cfg, rows, fs::path(manifest_path).parent_path().string());
}

void write_report_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "write_report_csv: cannot open '" + path + "'");
  out.precision(10);
  out << "# tdekit-eval-v1\n";
  out << "clip_id,truth_ms,pred_ms,abs_err_ms\n";
  for (const auto& r : report.rows)
    out << r.clip_id << "," << r.truth_ms << "," << r.pred_ms << "," << r.abs_err_ms << "\n";
  out << "# summary\n";
  out << "# mae_ms," << report.mae_ms << "\n";
  out << "# rmse_ms," << report.rmse_ms << "\n";
  out << "# lr_accuracy," << report.lr_accuracy << "\n";
  out << "# n," << report.n << "\n";
  out << "# lr_n," << report.lr_n << "\n";
  require(out.good(), "write_report_csv: write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "snr") return SweepAxis::Snr;
  if (name == "rt60") return SweepAxis::Rt60;
  if (name == "mixture") return SweepAxis::Mixture;
  fail("unknown sweep axis '" + name + "' (expected snr, rt60 or mixture)");
}

std::vector<double> default_sweep_values(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::Snr: return {-5, 0, 5, 10, 15, 20};
    case SweepAxis::Rt60: return {0.1, 0.3, 0.5, 0.7, 0.9};
    case SweepAxis::Mixture: return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  }
  return {};
}

std::vector<SweepPoint> sweep(const SweepConfig& cfg) {
  require(!cfg.methods.empty(), "sweep: no methods");
  require(cfg.count >= 1, "sweep: need at least one scene per condition");
  const std::vector<double> values = cfg.values.empty() ? default_sweep_values(cfg.axis) : cfg.values;
  require(!values.empty(), "sweep: no condition values");

  std::vector<SweepPoint> points;
  for (double value : values) {
    // The scene set is identical across conditions; only the swept variable
    // changes (and mixture scenes reuse the same dominant/distractor pair).
    std::vector<EvalItem> items(static_cast<std::size_t>(cfg.count));
    parallel_chunks(items.size(), [&](std::size_t i) {
      const int room_id = cfg.rooms[i % cfg.rooms.size()];
      RoomConfig room = room_preset(room_id);
      const std::uint64_t scene_seed = hash_combine(cfg.seed, i);
      Rng rng(hash_combine(scene_seed, 0x73776565ULL));
      const std::size_t n = static_cast<std::size_t>(std::llround(cfg.duration_s * 16000.0));

      double snr = 30.0, rt60 = 0.1;
      if (cfg.axis == SweepAxis::Snr) {
        snr = value;
        rt60 = 0.1;
      } else if (cfg.axis == SweepAxis::Rt60) {
        snr = 30.0;
        rt60 = value;
      }

      auto make_signal = [&](std::uint64_t salt) {
        const std::uint64_t s = hash_combine(scene_seed, salt);
        return cfg.signal == "white" ? white_noise(n, 16000.0, s)
                                     : speechlike_source(n, 16000.0, s);
      };

      Scene scene;
      scene.room = room;
      scene.room.rt60 = rt60;
      scene.seed = scene_seed;
      scene.sources = {sample_source(room, rng)};

      if (cfg.axis == SweepAxis::Mixture) {
        // Render dominant and distractor dry, mix at the condition's
        // loudness ratio, then add the fixed 30 dB noise.
        scene.snr_db = std::numeric_limits<double>::infinity();
        const RenderResult dom = render_scene(scene, {make_signal(0x646f6dULL)});
        Scene dscene = scene;
        dscene.sources = {sample_source(room, rng)};
        dscene.seed = hash_combine(scene_seed, 0x64697374ULL);
        const RenderResult dis = render_scene(dscene, {make_signal(0x646973ULL)});
        StereoClip mixed = make_mixture(dom.audio, dis.audio, value);
        mixed = add_noise(mixed, 30.0, hash_combine(scene_seed, 0x6e6fULL));
        items[i] = {static_cast<int>(i), std::move(mixed), dom.tdoas[0],
                    static_cast<double>(default_max_lag(room.mic_spacing(), room.speed_of_sound,
                                                        16000.0)) /
                        16000.0};
      } else {
        scene.snr_db = snr;
        RenderResult r = render_scene(scene, {make_signal(0x646f6dULL)});
        items[i] = {static_cast<int>(i), std::move(r.audio), r.tdoas[0],
                    static_cast<double>(default_max_lag(room.mic_spacing(), room.speed_of_sound,
                                                        16000.0)) /
                        16000.0};
      }
    });

    for (const auto& m : cfg.methods) {
      std::vector<EvalItem> copy = items;
      SweepPoint point;
      point.method = method_label(m);
      point.condition = value;
      point.report = evaluate_items(m, copy);
      points.push_back(std::move(point));
    }
  }
  return points;
}

void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "write_sweep_csv: cannot open '" + path + "'");
  out.precision(10);
  out << "# tdekit-sweep-v1\n";
  out << "axis_value,method,mae_ms,rmse_ms,lr_accuracy,n\n";
  for (const auto& p : points)
    out << p.condition << "," << p.method << "," << p.report.mae_ms << "," << p.report.rmse_ms
        << "," << p.report.lr_accuracy << "," << p.report.n << "\n";
  require(out.good(), "write_sweep_csv: write failed for '" + path + "'");
}

}  // namespace tde
