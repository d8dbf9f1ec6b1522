#include "tdekit/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

namespace tde {

std::vector<double> vote_delays(const AffinityMatrix& a, int step, double rate, VoteMode mode,
                                double max_delay_s) {
  require(step >= 1 && rate > 0, "vote_delays: step and rate must be positive");
  require(max_delay_s > 0, "vote_delays: max_delay must be positive");
  const Eigen::Index n = a.values.rows();
  require(a.values.cols() == n, "vote_delays: affinity must be square");

  const double unit = static_cast<double>(step) / rate;  // seconds per node offset
  std::vector<double> votes(static_cast<std::size_t>(n));
  for (Eigen::Index s = 0; s < n; ++s) {
    // Candidate columns t with |(t - s) * unit| <= max_delay.
    const Eigen::Index radius = static_cast<Eigen::Index>(std::floor(max_delay_s / unit));
    const Eigen::Index lo = std::max<Eigen::Index>(0, s - radius);
    const Eigen::Index hi = std::min<Eigen::Index>(n - 1, s + radius);
    require(lo <= hi, "vote_delays: empty restricted support (max_delay too small)");

    if (mode == VoteMode::Argmax) {
      Eigen::Index best = lo;
      for (Eigen::Index t = lo + 1; t <= hi; ++t)
        if (a.values(s, t) > a.values(s, best)) best = t;
      votes[static_cast<std::size_t>(s)] = static_cast<double>(best - s) * unit;
    } else {
      double mass = 0.0, acc = 0.0;
      for (Eigen::Index t = lo; t <= hi; ++t) {
        mass += a.values(s, t);
        acc += static_cast<double>(t - s) * unit * a.values(s, t);
      }
      require(mass > 0, "vote_delays: zero probability mass in restricted support");
      votes[static_cast<std::size_t>(s)] = acc / mass;
    }
  }
  return votes;
}

DelayEstimate aggregate_mean(const std::vector<double>& votes) {
  require(!votes.empty(), "aggregate_mean: no votes");
  double acc = 0.0;
  for (double v : votes) acc += v;
  DelayEstimate e;
  e.delay_s = acc / static_cast<double>(votes.size());
  e.votes = votes;
  e.method = "mean";
  return e;
}

DelayEstimate aggregate_mode_ransac(const std::vector<double>& votes, double rate,
                                    double inlier_threshold_samples) {
  require(!votes.empty(), "aggregate_mode_ransac: no votes");
  require(rate > 0, "aggregate_mode_ransac: rate must be positive");

  // Histogram at one-sample bins.
  std::map<long long, int> bins;
  for (double v : votes) bins[std::llround(v * rate)]++;

  std::vector<double> sorted(votes);
  std::sort(sorted.begin(), sorted.end());
  const double median_samples = rate * (sorted.size() % 2 == 1
                                            ? sorted[sorted.size() / 2]
                                            : 0.5 * (sorted[sorted.size() / 2 - 1] +
                                                     sorted[sorted.size() / 2]));

  // Tie-break chain: highest count, then distance to the vote median, then
  // smaller |bin|, then smaller signed bin.
  bool first = true;
  long long best_bin = 0;
  int best_count = 0;
  for (const auto& [bin, count] : bins) {
    bool better = false;
    if (first) {
      better = true;
    } else if (count != best_count) {
      better = count > best_count;
    } else {
      const double da = std::abs(static_cast<double>(bin) - median_samples);
      const double db = std::abs(static_cast<double>(best_bin) - median_samples);
      if (da != db)
        better = da < db;
      else if (std::llabs(bin) != std::llabs(best_bin))
        better = std::llabs(bin) < std::llabs(best_bin);
      else
        better = bin < best_bin;
    }
    if (better) {
      best_bin = bin;
      best_count = count;
      first = false;
    }
  }

  double acc = 0.0;
  int inliers = 0;
  for (double v : votes) {
    if (std::abs(v * rate - static_cast<double>(best_bin)) <= inlier_threshold_samples) {
      acc += v;
      ++inliers;
    }
  }
  DelayEstimate e;
  e.delay_s = acc / static_cast<double>(inliers);
  e.votes = votes;
  e.method = "mode";
  e.inlier_count = inliers;
  return e;
}

DelayEstimate aggregate(const std::vector<double>& votes, Aggregation agg, double rate) {
  return agg == Aggregation::Mean ? aggregate_mean(votes) : aggregate_mode_ransac(votes, rate);
}

namespace {

// Restricted-support voting straight from embeddings; equivalent to building
// the full affinity and renormalizing each restricted row, without the n x n
// matrix.
std::vector<double> vote_rows_from_embeddings(const Eigen::MatrixXd& rows_h,
                                              const Eigen::MatrixXd& cols_h,
                                              const std::vector<Eigen::Index>& row_ids, int step,
                                              double rate, VoteMode mode, double max_delay_s,
                                              double temperature) {
  const Eigen::Index n = cols_h.rows();
  const double unit = static_cast<double>(step) / rate;
  const Eigen::Index radius = static_cast<Eigen::Index>(std::floor(max_delay_s / unit));
  std::vector<double> votes;
  votes.reserve(row_ids.size());
  for (const Eigen::Index s : row_ids) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, s - radius);
    const Eigen::Index hi = std::min<Eigen::Index>(n - 1, s + radius);
    require(lo <= hi, "estimate_delay: empty restricted support (max_delay too small)");
    double best_logit = -1e300;
    std::vector<double> logits(static_cast<std::size_t>(hi - lo + 1));
    for (Eigen::Index t = lo; t <= hi; ++t) {
      const double l = rows_h.row(s).dot(cols_h.row(t)) / temperature;
      logits[static_cast<std::size_t>(t - lo)] = l;
      best_logit = std::max(best_logit, l);
    }
    if (mode == VoteMode::Argmax) {
      Eigen::Index best = lo;
      for (Eigen::Index t = lo; t <= hi; ++t)
        if (logits[static_cast<std::size_t>(t - lo)] == best_logit) {
          best = t;
          break;
        }
      votes.push_back(static_cast<double>(best - s) * unit);
    } else {
      double mass = 0.0, acc = 0.0;
      for (Eigen::Index t = lo; t <= hi; ++t) {
        const double p = std::exp(logits[static_cast<std::size_t>(t - lo)] - best_logit);
        mass += p;
        acc += static_cast<double>(t - s) * unit * p;
      }
      votes.push_back(acc / mass);
    }
  }
  return votes;
}

}  // namespace

DelayEstimate estimate_delay(const ModelParams& params, const StereoClip& clip,
                             const EstimateConfig& cfg) {
  clip.validate();
  require(clip.size() >= static_cast<std::size_t>(cfg.window) + cfg.step,
          "estimate_delay: clip shorter than one analysis window");

  // Right-channel windows index the affinity rows; see header.
  const EmbeddingSequence h_right = embed_sequence(params, clip.right, cfg.window, cfg.step);
  const EmbeddingSequence h_left = embed_sequence(params, clip.left, cfg.window, cfg.step);

  const Eigen::Index n = h_right.count();
  std::vector<Eigen::Index> rows;
  if (cfg.max_votes == 1) {
    rows.push_back(n / 2);
  } else if (cfg.max_votes > 0 && static_cast<Eigen::Index>(cfg.max_votes) < n) {
    rows.resize(cfg.max_votes);
    for (int i = 0; i < cfg.max_votes; ++i)
      rows[i] = static_cast<Eigen::Index>(
          std::llround(static_cast<double>(i) * static_cast<double>(n - 1) /
                       static_cast<double>(cfg.max_votes - 1)));
  } else {
    rows.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;
  }

  const std::vector<double> votes =
      vote_rows_from_embeddings(h_right.vectors, h_left.vectors, rows, cfg.step, clip.rate(),
                                cfg.vote_mode, cfg.max_delay_s, cfg.temperature);
  DelayEstimate e = aggregate(votes, cfg.agg, clip.rate());
  e.method = std::string("model/") + (cfg.agg == Aggregation::Mean ? "mean" : "mode");
  return e;
}

double delay_to_angle(double delay_s, double mic_distance_m, double c) {
  require(mic_distance_m > 0 && c > 0, "delay_to_angle: distance and speed must be positive");
  const double arg = std::clamp(delay_s * c / mic_distance_m, -1.0, 1.0);
  return std::asin(arg) * 180.0 / 3.14159265358979323846;
}

Direction iid_direction(const StereoClip& clip) {
  clip.validate();
  const double l = clip.left.rms();
  const double r = clip.right.rms();
  require(l > 0 || r > 0, "iid_direction: silent clip");
  return r >= l ? Direction::Right : Direction::Left;
}

std::string to_json(const DelayEstimate& e) {
  nlohmann::json j;
  j["delay_ms"] = e.delay_s * 1000.0;
  if (e.angle_deg) j["angle_deg"] = *e.angle_deg;
  j["method"] = e.method;
  j["n_votes"] = e.votes.size();
  if (e.inlier_count) j["inlier_count"] = *e.inlier_count;
  return j.dump();
}

}  // namespace tde
