#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tdekit/audio.hpp"
#include "tdekit/common.hpp"
#include "tdekit/embedder.hpp"
#include "tdekit/losses.hpp"

namespace tde {

enum class Aggregation { Mean, ModeRansac };
enum class VoteMode { Argmax, Expectation };

/// A single aggregated delay plus the per-window votes behind it.
/// Positive delays mean the right channel leads (project sign convention).
struct DelayEstimate {
  double delay_s = 0.0;
  std::vector<double> votes;  // per-node delays, seconds
  std::string method;
  std::optional<int> inlier_count;
  std::optional<double> angle_deg;
};

/// One delay vote per affinity row s: candidates are tau(s, t) =
/// (t - s) * step / rate restricted to |tau| <= max_delay_s; Argmax takes the
/// highest-probability candidate, Expectation renormalizes the restricted row
/// and returns sum tau * p.
std::vector<double> vote_delays(const AffinityMatrix& a, int step, double rate, VoteMode mode,
                                double max_delay_s);

DelayEstimate aggregate_mean(const std::vector<double>& votes);

/// Histogram the votes at one-sample bins, pick the fullest bin (ties broken
/// toward the vote median, then smaller |tau|, then smaller signed value) and
/// average the votes within inlier_threshold samples of the bin center.
DelayEstimate aggregate_mode_ransac(const std::vector<double>& votes, double rate,
                                    double inlier_threshold_samples = 2.0);

DelayEstimate aggregate(const std::vector<double>& votes, Aggregation agg, double rate);

struct EstimateConfig {
  int window = 1024;
  int step = 1;                    // test-time sliding-window hop
  Aggregation agg = Aggregation::ModeRansac;
  VoteMode vote_mode = VoteMode::Expectation;
  double temperature = 0.05;
  double max_delay_s = 26.0 / 16000.0;  // default covers 0.3 m spacing at 16 kHz with margin
  int max_votes = 0;               // 0 = one vote per window; else subsample this many rows
};

/// End-to-end learned estimate: embeds both channels, forms the affinity with
/// right-channel windows as rows (so the spec's (t - s) vote formula yields
/// positive delays when the right microphone leads), votes and aggregates.
/// For long inputs set max_votes; rows are then subsampled uniformly and only
/// in-range candidate columns are scored, which is algebraically identical to
/// restricting and renormalizing the full affinity row.
DelayEstimate estimate_delay(const ModelParams& params, const StereoClip& clip,
                             const EstimateConfig& cfg = {});

/// Far-field delay-to-angle conversion: theta = arcsin(delay * c / d) in
/// degrees; the argument is clamped into [-1, 1] if the delay exceeds the
/// geometric bound.
double delay_to_angle(double delay_s, double mic_distance_m, double c = 343.0);

enum class Direction { Left, Right };

/// Interaural-intensity baseline: the louder channel wins; exact ties go
/// right.
Direction iid_direction(const StereoClip& clip);

/// One-line JSON rendering {delay_ms, angle_deg?, method, n_votes,
/// inlier_count?}.
std::string to_json(const DelayEstimate& e);

}  // namespace tde
