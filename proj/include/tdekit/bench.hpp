#pragma once

#include <string>
#include <vector>

#include "tdekit/estimator.hpp"
#include "tdekit/gcc.hpp"
#include "tdekit/manifest.hpp"

namespace tde {

/// Scene sampling grid: one cell per (room, snr, rt60) combination,
/// count_per_cell scenes each, angles and distances drawn per the protocol
/// (uniform in [-90, 90] degrees and [0.5, 3.0] m).
struct SimGrid {
  std::vector<int> rooms = {1, 2, 3};
  std::vector<double> snrs = {10.0};
  std::vector<double> rt60s = {0.1};
  int count_per_cell = 10;
  int sources = 1;
  double duration_s = 0.5;
  double rate = 16000.0;
  std::string signal = "speechlike";
  bool write_wavs = true;  // float-32 WAVs under <out_dir>/clips/
};

/// Samples and renders a dataset; writes <out_dir>/manifest.txt (and WAVs
/// unless disabled) and returns the rows. Deterministic in (grid, seed).
std::vector<ManifestRow> gen_dataset(const SimGrid& grid, std::uint64_t seed,
                                     const std::string& out_dir);

enum class Method { Gcc, Model, Iid, Random };

Method parse_method(const std::string& name);

struct EvalConfig {
  Method method = Method::Gcc;
  std::string checkpoint;  // model method only
  int votes = 128;
  int window = 1024;
  int model_step = 1;      // sliding-window hop for the learned estimator
  Aggregation agg = Aggregation::Mean;
  VoteMode vote_mode = VoteMode::Expectation;
  double temperature = 0.05;
  int context = 0;         // center-crop length in samples; 0 keeps the clip
  double max_delay_s = 0;  // 0 derives the range from the row's geometry
  std::uint64_t seed = 0;  // random baseline draws
};

std::string method_label(const EvalConfig& cfg);

struct EvalRow {
  int clip_id = 0;
  double truth_ms = 0, pred_ms = 0, abs_err_ms = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double mae_ms = 0, rmse_ms = 0;
  double lr_accuracy = 0;  // sign agreement, |truth| < 1 sample excluded
  int n = 0;
  int lr_n = 0;  // clips that entered the left/right accuracy count
};

EvalReport evaluate(const EvalConfig& cfg, const std::string& manifest_path);
EvalReport evaluate_rows(const EvalConfig& cfg, const std::vector<ManifestRow>& rows,
                         const std::string& manifest_dir);

/// Fills the summary fields (MAE, RMSE, left/right accuracy) from the
/// per-clip rows; clips with |truth| below dead_zone_ms stay out of the
/// left/right count.
void summarize(EvalReport& report, double dead_zone_ms);

/// Versioned CSV: per-clip rows then a summary footer block.
void write_report_csv(const EvalReport& report, const std::string& path);

enum class SweepAxis { Snr, Rt60, Mixture };

SweepAxis parse_sweep_axis(const std::string& name);

/// Off-axis conditions follow the shipped protocol: the SNR sweep fixes
/// RT60 = 0.1 s, the RT60 sweep fixes SNR = 30 dB, and the mixture sweep
/// fixes SNR = 30 dB / RT60 = 0.1 s with 0.5 s inputs and a second
/// same-room source rescaled to the condition's loudness ratio.
struct SweepConfig {
  SweepAxis axis = SweepAxis::Snr;
  std::vector<double> values;  // empty selects the documented default grid
  std::vector<EvalConfig> methods;
  std::vector<int> rooms = {1, 2, 3};
  int count = 60;  // scenes per condition
  double duration_s = 0.5;
  std::string signal = "speechlike";
  std::uint64_t seed = 0;
};

std::vector<double> default_sweep_values(SweepAxis axis);

struct SweepPoint {
  std::string method;
  double condition = 0;
  EvalReport report;
};

/// One report per (method, condition); the scene set is shared across
/// conditions so only the swept variable changes.
std::vector<SweepPoint> sweep(const SweepConfig& cfg);

void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& path);

}  // namespace tde
