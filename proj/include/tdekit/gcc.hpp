#pragma once

#include <vector>

#include "tdekit/audio.hpp"
#include "tdekit/common.hpp"
#include "tdekit/estimator.hpp"

namespace tde {

/// Correlation values over integer sample lags in [-max_lag, max_lag].
/// With x1 = left and x2 = right, a positive argmax lag means the right
/// channel leads (project sign convention).
struct CorrelationCurve {
  int max_lag = 0;
  std::vector<double> values;  // index i holds lag i - max_lag

  double at(int lag) const { return values[static_cast<std::size_t>(lag + max_lag)]; }
  /// Lag of the largest value; ties break toward smaller |lag|, then the
  /// smaller signed lag.
  int argmax_lag() const;
};

/// R(tau) = sum_t x1(t) * x2(t - tau) over |tau| <= max_lag, evaluated from
/// the FFT cross-spectrum.
CorrelationCurve cross_correlation(const MonoClip& x1, const MonoClip& x2, int max_lag);

/// Cross-correlation of the PHAT-whitened spectrum: every cross-spectral bin
/// is divided by max(|bin|, 1e-12) before the lag evaluation.
CorrelationCurve gcc_phat(const MonoClip& x1, const MonoClip& x2, int max_lag);

/// Search range covering a microphone spacing with two samples of margin.
int default_max_lag(double mic_spacing_m, double c, double rate);

/// Search range when no geometry is known (0.3 m spacing at 16 kHz).
inline constexpr int kFallbackMaxLag = 26;

/// Slices the clip into `votes` windows of `window` samples at uniform
/// stride (overlapping when the clip is short), takes the GCC-PHAT argmax
/// lag of each as a vote, and aggregates.
DelayEstimate classic_estimate(const StereoClip& clip, int votes, int window, Aggregation agg,
                               int max_lag = kFallbackMaxLag);

}  // namespace tde
