#include "tdekit/sim.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <complex>

#include <unsupported/Eigen/FFT>

namespace tde {

namespace {
constexpr double kPi = 3.14159265358979323846;

bool strictly_inside(const Vec3& p, const Vec3& dims) {
  for (int i = 0; i < 3; ++i)
    if (!(p[i] > 0.0 && p[i] < dims[i])) return false;
  return true;
}
}  // namespace

void RoomConfig::validate() const {
  require(dims[0] > 0 && dims[1] > 0 && dims[2] > 0, "RoomConfig: dims must be positive");
  require(strictly_inside(mic_left, dims) && strictly_inside(mic_right, dims),
          "RoomConfig: microphones must lie strictly inside the room");
  require(rt60 >= 0, "RoomConfig: rt60 must be non-negative");
  require(speed_of_sound > 0, "RoomConfig: speed of sound must be positive");
  require(mic_spacing() > 0, "RoomConfig: microphones coincide");
}

RoomConfig room_preset(int id) {
  RoomConfig r;
  switch (id) {
    case 1:
      r.dims = {7.0, 6.0, 3.0};
      r.mic_left = {3.4, 1.0, 1.6};
      r.mic_right = {3.7, 1.0, 1.6};
      break;
    case 2:
      r.dims = {4.0, 7.0, 2.8};
      r.mic_left = {0.2, 3.2, 1.7};
      r.mic_right = {0.2, 3.0, 1.7};
      break;
    case 3:
      r.dims = {7.0, 7.0, 2.7};
      r.mic_left = {3.4, 3.1, 1.5};
      r.mic_right = {3.5, 2.9, 1.5};
      break;
    default:
      fail("room_preset: id must be 1, 2 or 3");
  }
  return r;
}

namespace {

Vec3 raw_source_position(const RoomConfig& room, const SourceSpec& src) {
  require(src.angle_deg >= -90.0 && src.angle_deg <= 90.0, "SourceSpec: angle outside [-90, 90]");
  require(src.distance_m > 0.0, "SourceSpec: distance must be positive");

  const Vec3 mid = 0.5 * (room.mic_left + room.mic_right);
  Vec3 axis = room.mic_right - room.mic_left;
  axis[2] = 0.0;
  require(axis.norm() > 0, "source_position: vertical microphone pairs are unsupported");
  axis.normalize();

  // Broadside direction: horizontal perpendicular pointing into the room.
  Vec3 perp = axis.cross(Vec3{0.0, 0.0, 1.0});
  const Vec3 center{0.5 * room.dims[0], 0.5 * room.dims[1], mid[2]};
  if (perp.dot(center - mid) < 0) perp = -perp;

  const double a = src.angle_deg * kPi / 180.0;
  return mid + src.distance_m * (std::sin(a) * axis + std::cos(a) * perp);
}

}  // namespace

Vec3 source_position(const RoomConfig& room, const SourceSpec& src) {
  Vec3 pos = raw_source_position(room, src);
  require(strictly_inside(pos, room.dims), "source outside room");
  return pos;
}

bool source_fits(const RoomConfig& room, const SourceSpec& src, double margin_m) {
  if (src.angle_deg < -90.0 || src.angle_deg > 90.0 || src.distance_m <= 0.0) return false;
  const Vec3 pos = raw_source_position(room, src);
  for (int i = 0; i < 3; ++i)
    if (!(pos[i] > margin_m && pos[i] < room.dims[i] - margin_m)) return false;
  return true;
}

void Scene::validate() const {
  room.validate();
  require(!sources.empty(), "Scene: at least one source required");
  for (const auto& s : sources) (void)source_position(room, s);
}

double ground_truth_tdoa(const RoomConfig& room, const Vec3& src_pos) {
  const double dl = (src_pos - room.mic_left).norm();
  const double dr = (src_pos - room.mic_right).norm();
  require(dl > 1e-9 && dr > 1e-9, "ground_truth_tdoa: source coincides with a microphone");
  return (dl - dr) / room.speed_of_sound;
}

double ground_truth_tdoa(const RoomConfig& room, const SourceSpec& src) {
  return ground_truth_tdoa(room, source_position(room, src));
}

double rt60_to_absorption(const RoomConfig& room) {
  require(room.rt60 > 0, "rt60_to_absorption: rt60 must be positive (0 is anechoic)");
  const double v = room.dims[0] * room.dims[1] * room.dims[2];
  const double s = 2.0 * (room.dims[0] * room.dims[1] + room.dims[0] * room.dims[2] +
                          room.dims[1] * room.dims[2]);
  const double alpha = 0.161 * v / (s * room.rt60);
  return std::min(alpha, 0.99);
}

// ---------------------------------------------------------------------------
// Image-source impulse responses
// ---------------------------------------------------------------------------

namespace {

constexpr int kSincHalf = 32;  // 64-tap fractional delay kernel

// Stamps a windowed-sinc impulse of the given amplitude at fractional
// sample position `delay` into `ir`.
void stamp(std::vector<double>& ir, double delay, double amplitude) {
  const std::int64_t lo = static_cast<std::int64_t>(std::ceil(delay - kSincHalf));
  const std::int64_t hi = static_cast<std::int64_t>(std::floor(delay + kSincHalf));
  for (std::int64_t n = std::max<std::int64_t>(lo, 0); n <= hi; ++n) {
    if (n >= static_cast<std::int64_t>(ir.size())) break;
    const double t = static_cast<double>(n) - delay;
    const double w = 0.5 + 0.5 * std::cos(kPi * t / kSincHalf);
    double v;
    if (std::abs(t) < 1e-12) {
      v = 1.0;
    } else {
      v = std::sin(kPi * t) / (kPi * t);
    }
    ir[static_cast<std::size_t>(n)] += amplitude * v * w;
  }
}

struct Image {
  double dist;
  int order;
};

std::vector<Image> enumerate_images(const RoomConfig& room, const Vec3& src, const Vec3& mic,
                                    int max_order) {
  std::vector<Image> images;
  const int span = max_order / 2 + 1;
  for (int mx = -span; mx <= span; ++mx)
    for (int q = 0; q <= 1; ++q) {
      const int ox = std::abs(mx - q) + std::abs(mx);
      if (ox > max_order) continue;
      const double px = (1 - 2 * q) * src[0] + 2.0 * mx * room.dims[0];
      for (int my = -span; my <= span; ++my)
        for (int j = 0; j <= 1; ++j) {
          const int oy = ox + std::abs(my - j) + std::abs(my);
          if (oy > max_order) continue;
          const double py = (1 - 2 * j) * src[1] + 2.0 * my * room.dims[1];
          for (int mz = -span; mz <= span; ++mz)
            for (int k = 0; k <= 1; ++k) {
              const int order = oy + std::abs(mz - k) + std::abs(mz);
              if (order > max_order) continue;
              const double pz = (1 - 2 * k) * src[2] + 2.0 * mz * room.dims[2];
              const Vec3 img{px, py, pz};
              images.push_back({(img - mic).norm(), order});
            }
        }
    }
  return images;
}

}  // namespace

std::vector<double> build_rir(const RoomConfig& room, const Vec3& src_pos, const Vec3& mic_pos,
                              double rate, int max_order, bool align_direct) {
  room.validate();
  require(rate > 0, "build_rir: rate must be positive");
  require(max_order >= 0, "build_rir: max_order must be non-negative");
  const double direct_dist = (src_pos - mic_pos).norm();
  require(direct_dist > 1e-9, "build_rir: source coincides with the microphone");

  const double beta = max_order > 0 ? std::sqrt(1.0 - rt60_to_absorption(room)) : 0.0;
  const double c = room.speed_of_sound;

  auto images = enumerate_images(room, src_pos, mic_pos, max_order);
  double max_dist = 0.0;
  for (const auto& im : images) max_dist = std::max(max_dist, im.dist);

  const double offset = align_direct ? -direct_dist / c * rate : 0.0;
  const std::size_t len =
      static_cast<std::size_t>(std::ceil(max_dist / c * rate + offset)) + kSincHalf + 2;
  std::vector<double> ir(len, 0.0);

  const double direct_amp = 1.0 / (4.0 * kPi * direct_dist);
  for (const auto& im : images) {
    const double amp = std::pow(beta, im.order) / (4.0 * kPi * im.dist);
    stamp(ir, im.dist / c * rate + offset, align_direct ? amp / direct_amp : amp);
  }
  return ir;
}

double measure_rt60(const std::vector<double>& ir, double rate) {
  require(!ir.empty() && rate > 0, "measure_rt60: empty impulse response");
  // Schroeder backward integral.
  std::vector<double> energy(ir.size());
  double acc = 0.0;
  for (std::size_t i = ir.size(); i-- > 0;) {
    acc += ir[i] * ir[i];
    energy[i] = acc;
  }
  require(acc > 0, "measure_rt60: silent impulse response");

  // Least-squares line through the decay curve between -5 dB and -15 dB,
  // extrapolated to -60 dB. The fit region stays clear of the direct sound
  // and of the truncation plunge at the tail.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < ir.size(); ++i) {
    if (energy[i] <= 0) break;
    const double level = 10.0 * std::log10(energy[i] / acc);
    if (level > -5.0) continue;
    if (level < -15.0) break;
    const double t = static_cast<double>(i) / rate;
    sx += t;
    sy += level;
    sxx += t * t;
    sxy += t * level;
    ++count;
  }
  require(count >= 2, "measure_rt60: decay range too short to fit");
  const double denom = static_cast<double>(count) * sxx - sx * sx;
  require(std::abs(denom) > 0, "measure_rt60: degenerate fit");
  const double slope = (static_cast<double>(count) * sxy - sx * sy) / denom;  // dB per second
  require(slope < 0, "measure_rt60: non-decaying response");
  return -60.0 / slope;
}

// ---------------------------------------------------------------------------
// Convolution and rendering
// ---------------------------------------------------------------------------

namespace {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

MonoClip convolve(const MonoClip& x, const std::vector<double>& ir) {
  require(!ir.empty(), "convolve: empty impulse response");
  const std::size_t n = x.size();
  MonoClip out;
  out.rate = x.rate;
  out.samples.assign(n, 0.0);
  if (n == 0) return out;

  if (ir.size() <= 128) {
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t kmax = std::min(ir.size() - 1, t);
      double acc = 0.0;
      for (std::size_t k = 0; k <= kmax; ++k) acc += ir[k] * x.samples[t - k];
      out.samples[t] = acc;
    }
    return out;
  }

  const std::size_t fft_n = next_pow2(n + ir.size() - 1);
  std::vector<std::complex<double>> a(fft_n), b(fft_n), spec(fft_n);
  for (std::size_t i = 0; i < n; ++i) a[i] = x.samples[i];
  for (std::size_t i = 0; i < ir.size(); ++i) b[i] = ir[i];
  thread_local Eigen::FFT<double> fft;
  fft.fwd(spec, a);
  a.swap(spec);
  fft.fwd(spec, b);
  for (std::size_t i = 0; i < fft_n; ++i) a[i] *= spec[i];
  fft.inv(spec, a);
  for (std::size_t i = 0; i < n; ++i) out.samples[i] = spec[i].real();
  return out;
}

RenderResult render_scene(const Scene& scene, const std::vector<MonoClip>& signals) {
  scene.validate();
  require(signals.size() == scene.sources.size(), "render_scene: one signal per source required");
  const double rate = signals.at(0).rate;
  std::size_t n = 0;
  for (const auto& sig : signals) {
    require(sig.rate == rate, "render_scene: signals must share a rate");
    n = std::max(n, sig.size());
  }
  require(n > 0, "render_scene: empty signals");

  const int order = scene.room.rt60 > 0 ? kImageOrder : 0;

  RenderResult result;
  result.audio.left.rate = rate;
  result.audio.right.rate = rate;
  result.audio.left.samples.assign(n, 0.0);
  result.audio.right.samples.assign(n, 0.0);

  for (std::size_t i = 0; i < scene.sources.size(); ++i) {
    const SourceSpec& spec = scene.sources[i];
    const Vec3 pos = source_position(scene.room, spec);
    result.tdoas.push_back(ground_truth_tdoa(scene.room, pos));
    if (spec.gain == 0.0) continue;

    MonoClip driven;
    driven.rate = rate;
    driven.samples.assign(n, 0.0);
    for (std::size_t t = 0; t < signals[i].size(); ++t)
      driven.samples[t] = spec.gain * signals[i].samples[t];

    const auto ir_l = build_rir(scene.room, pos, scene.room.mic_left, rate, order);
    const auto ir_r = build_rir(scene.room, pos, scene.room.mic_right, rate, order);
    const MonoClip wet_l = convolve(driven, ir_l);
    const MonoClip wet_r = convolve(driven, ir_r);
    for (std::size_t t = 0; t < n; ++t) {
      result.audio.left.samples[t] += wet_l.samples[t];
      result.audio.right.samples[t] += wet_r.samples[t];
    }
  }

  if (std::isfinite(scene.snr_db))
    result.audio = add_noise(result.audio, scene.snr_db, hash_combine(scene.seed, 0x6e6f6973ULL));
  return result;
}

// ---------------------------------------------------------------------------
// Noise and mixtures
// ---------------------------------------------------------------------------

MonoClip add_noise(const MonoClip& clip, double snr_db, std::uint64_t seed) {
  const double p = clip.power();
  require(p > 0, "add_noise: silent clip (SNR undefined)");
  const double sigma = std::sqrt(p / std::pow(10.0, snr_db / 10.0));
  Rng rng(seed);
  MonoClip out = clip;
  for (auto& s : out.samples) s += sigma * rng.normal();
  return out;
}

StereoClip add_noise(const StereoClip& clip, double snr_db, std::uint64_t seed) {
  clip.validate();
  Rng base(seed);
  StereoClip out;
  out.left = add_noise(clip.left, snr_db, base.fork(1).seed());
  out.right = add_noise(clip.right, snr_db, base.fork(2).seed());
  return out;
}

namespace {
double stereo_rms(const StereoClip& c) {
  return std::sqrt(0.5 * (c.left.power() + c.right.power()));
}
}  // namespace

StereoClip make_mixture(const StereoClip& dominant, const StereoClip& distractor, double intensity) {
  dominant.validate();
  distractor.validate();
  require(dominant.size() == distractor.size() && dominant.rate() == distractor.rate(),
          "make_mixture: clips must have equal length and rate");
  require(intensity > 0 && intensity <= 1.0, "make_mixture: intensity must lie in (0, 1]");
  const double dom_rms = stereo_rms(dominant);
  const double dis_rms = stereo_rms(distractor);
  require(dom_rms > 0, "make_mixture: silent dominant clip");
  require(dis_rms > 0, "make_mixture: silent distractor clip");
  const double scale = intensity * dom_rms / dis_rms;

  StereoClip out = dominant;
  for (std::size_t t = 0; t < out.size(); ++t) {
    out.left.samples[t] += scale * distractor.left.samples[t];
    out.right.samples[t] += scale * distractor.right.samples[t];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Test signals
// ---------------------------------------------------------------------------

MonoClip white_noise(std::size_t n, double rate, std::uint64_t seed) {
  Rng rng(seed);
  MonoClip out;
  out.rate = rate;
  out.samples.resize(n);
  for (auto& s : out.samples) s = 0.2 * rng.normal();
  return out;
}

namespace {

// RBJ constant-peak-gain bandpass biquad.
struct Biquad {
  double b0, b1, b2, a1, a2;
  double z1 = 0, z2 = 0;

  Biquad(double freq, double q, double rate) {
    const double w = 2.0 * kPi * freq / rate;
    const double alpha = std::sin(w) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    b0 = alpha / a0;
    b1 = 0.0;
    b2 = -alpha / a0;
    a1 = -2.0 * std::cos(w) / a0;
    a2 = (1.0 - alpha) / a0;
  }

  double tick(double x) {
    const double y = b0 * x + z1;
    z1 = b1 * x - a1 * y + z2;
    z2 = b2 * x - a2 * y;
    return y;
  }
};

}  // namespace

MonoClip speechlike_source(std::size_t n, double rate, std::uint64_t seed) {
  require(n > 0 && rate > 0, "speechlike_source: bad size or rate");
  Rng rng(seed);

  // Syllable-rate burst envelope with a small floor between bursts.
  std::vector<double> env(n, 0.05);
  std::size_t pos = static_cast<std::size_t>(rng.uniform(0.0, 0.03) * rate);
  while (pos < n) {
    const std::size_t gap = static_cast<std::size_t>(rng.uniform(0.02, 0.08) * rate);
    const std::size_t burst = static_cast<std::size_t>(rng.uniform(0.06, 0.22) * rate);
    const std::size_t attack = static_cast<std::size_t>(0.012 * rate);
    const std::size_t release = static_cast<std::size_t>(0.03 * rate);
    const double amp = rng.uniform(0.5, 1.0);
    const std::size_t start = pos + gap;
    for (std::size_t i = 0; i < burst && start + i < n; ++i) {
      double e = amp;
      if (i < attack) e *= static_cast<double>(i) / attack;
      if (burst - i < release) e *= static_cast<double>(burst - i) / release;
      env[start + i] = std::max(env[start + i], e);
    }
    pos = start + burst;
  }

  // Formant-like resonances over white noise.
  Biquad f1(rng.uniform(300.0, 900.0), rng.uniform(3.0, 8.0), rate);
  Biquad f2(rng.uniform(900.0, 2200.0), rng.uniform(3.0, 8.0), rate);
  Biquad f3(rng.uniform(2200.0, 3400.0), rng.uniform(3.0, 8.0), rate);

  MonoClip out;
  out.rate = rate;
  out.samples.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double x = rng.normal();
    out.samples[t] = (f1.tick(x) + 0.7 * f2.tick(x) + 0.4 * f3.tick(x)) * env[t];
  }
  const double r = out.rms();
  if (r > 0) {
    const double g = 0.15 / r;
    for (auto& s : out.samples) s *= g;
  }
  return out;
}

}  // namespace tde
