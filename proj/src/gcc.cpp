#include "tdekit/gcc.hpp"

#include <cmath>
#include <complex>

#include <unsupported/Eigen/FFT>

namespace tde {

namespace {

constexpr double kPhatFloor = 1e-12;
constexpr double kPi = 3.14159265358979323846;

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Cross-spectrum of the zero-padded signals; optionally PHAT-whitened.
std::vector<std::complex<double>> cross_spectrum(const MonoClip& x1, const MonoClip& x2,
                                                 int max_lag, bool phat) {
  require(x1.size() == x2.size(), "correlation: input lengths differ");
  require(x1.rate == x2.rate, "correlation: input rates differ");
  require(max_lag >= 0, "correlation: max_lag must be non-negative");
  require(x1.size() >= 2 * static_cast<std::size_t>(max_lag) + 1,
          "correlation: inputs shorter than the lag range");

  const std::size_t n = x1.size();
  const std::size_t fft_n = next_pow2(n + static_cast<std::size_t>(max_lag) + 1);

  thread_local Eigen::FFT<double> fft;
  std::vector<std::complex<double>> a(fft_n, 0.0), b(fft_n, 0.0), fa(fft_n), fb(fft_n);
  for (std::size_t i = 0; i < n; ++i) a[i] = x1.samples[i];
  for (std::size_t i = 0; i < n; ++i) b[i] = x2.samples[i];
  fft.fwd(fa, a);
  fft.fwd(fb, b);

  std::vector<std::complex<double>> spec(fft_n);
  bool any_nonzero = false;
  for (std::size_t i = 0; i < fft_n; ++i) {
    std::complex<double> c = fa[i] * std::conj(fb[i]);
    if (phat) c /= std::max(std::abs(c), kPhatFloor);
    if (c != std::complex<double>(0.0, 0.0)) any_nonzero = true;
    spec[i] = c;
  }
  require(!phat || any_nonzero, "gcc_phat: all-zero inputs");
  return spec;
}

// Evaluates the inverse transform at the 2*max_lag + 1 requested lags only.
// r(tau) = (1/N) sum_j Re(spec_j * e^{2 pi i j tau / N}); evaluating lag by
// lag makes R21(tau) the exact floating-point mirror of R12(-tau), which the
// channel-swap antisymmetry contract relies on.
CorrelationCurve lags_from_spectrum(const std::vector<std::complex<double>>& spec, int max_lag) {
  const std::size_t fft_n = spec.size();
  CorrelationCurve curve;
  curve.max_lag = max_lag;
  curve.values.resize(2 * static_cast<std::size_t>(max_lag) + 1);
  const double scale = 1.0 / static_cast<double>(fft_n);
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    const double w = 2.0 * kPi * static_cast<double>(lag) / static_cast<double>(fft_n);
    // Rotation recurrence with periodic re-sync; cos is even and sin odd, so
    // opposite lags use bitwise-conjugate rotations and the mirror identity
    // survives floating point exactly.
    const double cw = std::cos(w), sw = std::sin(w);
    double cr = 1.0, ci = 0.0;
    double acc = 0.0;
    for (std::size_t j = 0; j < fft_n; ++j) {
      if ((j & 511u) == 0) {
        const double th = w * static_cast<double>(j);
        cr = std::cos(th);
        ci = std::sin(th);
      }
      acc += spec[j].real() * cr - spec[j].imag() * ci;
      const double nr = cr * cw - ci * sw;
      ci = cr * sw + ci * cw;
      cr = nr;
    }
    curve.values[static_cast<std::size_t>(lag + max_lag)] = acc * scale;
  }
  return curve;
}

}  // namespace

int CorrelationCurve::argmax_lag() const {
  require(!values.empty(), "CorrelationCurve: empty");
  int best = -max_lag;
  for (int lag = -max_lag + 1; lag <= max_lag; ++lag) {
    const double v = at(lag), b = at(best);
    if (v > b ||
        (v == b && (std::abs(lag) < std::abs(best) || (std::abs(lag) == std::abs(best) && lag < best))))
      best = lag;
  }
  return best;
}

CorrelationCurve cross_correlation(const MonoClip& x1, const MonoClip& x2, int max_lag) {
  return lags_from_spectrum(cross_spectrum(x1, x2, max_lag, false), max_lag);
}

CorrelationCurve gcc_phat(const MonoClip& x1, const MonoClip& x2, int max_lag) {
  return lags_from_spectrum(cross_spectrum(x1, x2, max_lag, true), max_lag);
}

int default_max_lag(double mic_spacing_m, double c, double rate) {
  require(mic_spacing_m > 0 && c > 0 && rate > 0, "default_max_lag: positive arguments required");
  return static_cast<int>(std::ceil(mic_spacing_m / c * rate)) + 2;
}

DelayEstimate classic_estimate(const StereoClip& clip, int votes, int window, Aggregation agg,
                               int max_lag) {
  clip.validate();
  require(votes >= 1, "classic_estimate: need at least one vote");
  require(window >= 2 * max_lag + 1, "classic_estimate: window shorter than the lag range");
  const std::size_t n = clip.size();
  require(n >= static_cast<std::size_t>(window), "classic_estimate: clip shorter than the window");

  // Uniform window offsets spanning the clip; consecutive windows overlap
  // whenever (votes - 1) * window exceeds the clip.
  const double span = static_cast<double>(n - static_cast<std::size_t>(window));
  std::vector<double> vote_values;
  vote_values.reserve(static_cast<std::size_t>(votes));
  for (int k = 0; k < votes; ++k) {
    const std::size_t off =
        votes == 1 ? 0
                   : static_cast<std::size_t>(std::llround(span * static_cast<double>(k) /
                                                           static_cast<double>(votes - 1)));
    MonoClip l, r;
    l.rate = r.rate = clip.rate();
    l.samples.assign(clip.left.samples.begin() + off, clip.left.samples.begin() + off + window);
    r.samples.assign(clip.right.samples.begin() + off, clip.right.samples.begin() + off + window);
    const CorrelationCurve curve = gcc_phat(l, r, max_lag);
    vote_values.push_back(static_cast<double>(curve.argmax_lag()) / clip.rate());
  }

  DelayEstimate e = aggregate(vote_values, agg, clip.rate());
  e.method = std::string("gcc-phat/") + (agg == Aggregation::Mean ? "mean" : "mode");
  return e;
}

}  // namespace tde
