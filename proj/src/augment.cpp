#include "tdekit/augment.hpp"

#include <cmath>

namespace tde {

void AugmentConfig::validate() const {
  require(swap_p >= 0 && swap_p <= 1, "AugmentConfig: swap_p outside [0,1]");
  require(scale_lo > 0 && scale_hi >= scale_lo, "AugmentConfig: bad scale range");
  require(shift_bound >= 0, "AugmentConfig: negative shift bound");
  require(shift_quantum >= 1, "AugmentConfig: shift quantum must be positive");
  require(noise_snr_hi >= noise_snr_lo, "AugmentConfig: bad noise SNR range");
  require(reverb_rt60_lo >= 0 && reverb_rt60_hi >= reverb_rt60_lo,
          "AugmentConfig: bad reverb RT60 range");
  require(mixture_lo > 0 && mixture_hi >= mixture_lo && mixture_hi <= 1.0,
          "AugmentConfig: mixture intensity range must lie in (0, 1]");
}

std::pair<StereoClip, AugmentRecord> channel_swap(const StereoClip& clip, double p,
                                                  std::uint64_t seed) {
  AugmentRecord rec;
  Rng rng(hash_combine(seed, 0x73776170ULL));
  rec.swapped = rng.bernoulli(p);
  if (!rec.swapped) return {clip, rec};
  return {StereoClip{clip.right, clip.left}, rec};
}

std::pair<MonoClip, AugmentRecord> channel_scale(const MonoClip& clip, double lo, double hi,
                                                 std::uint64_t seed) {
  AugmentRecord rec;
  Rng rng(hash_combine(seed, 0x7363616cULL));
  rec.scale_left = rng.uniform(lo, hi);
  MonoClip out = clip;
  for (auto& s : out.samples) s *= rec.scale_left;
  return {std::move(out), rec};
}

std::pair<StereoClip, AugmentRecord> channel_scale(const StereoClip& clip, double lo, double hi,
                                                   std::uint64_t seed) {
  AugmentRecord rec;
  Rng rng(hash_combine(seed, 0x7363616cULL));
  rec.scale_left = rng.uniform(lo, hi);
  rec.scale_right = rng.uniform(lo, hi);
  StereoClip out = clip;
  for (auto& s : out.left.samples) s *= rec.scale_left;
  for (auto& s : out.right.samples) s *= rec.scale_right;
  return {std::move(out), rec};
}

namespace {

MonoClip circular_shift(const MonoClip& clip, int shift) {
  if (shift == 0) return clip;
  const std::int64_t n = static_cast<std::int64_t>(clip.size());
  MonoClip out;
  out.rate = clip.rate;
  out.samples.resize(clip.size());
  for (std::int64_t i = 0; i < n; ++i) {
    std::int64_t j = (i - shift) % n;
    if (j < 0) j += n;
    out.samples[static_cast<std::size_t>(i)] = clip.samples[static_cast<std::size_t>(j)];
  }
  return out;
}

int draw_shift(int bound, int quantum, Rng& rng) {
  require(bound % quantum == 0, "time_shift: bound must be a multiple of the quantum");
  const int steps = bound / quantum;
  return static_cast<int>(rng.uniform_int(-steps, steps)) * quantum;
}

}  // namespace

std::pair<MonoClip, AugmentRecord> time_shift(const MonoClip& clip, int bound, int quantum,
                                              std::uint64_t seed) {
  require(static_cast<std::size_t>(bound) < clip.size(), "time_shift: bound exceeds clip length");
  AugmentRecord rec;
  Rng rng(hash_combine(seed, 0x73686674ULL));
  rec.shift_samples = draw_shift(bound, quantum, rng);
  return {circular_shift(clip, rec.shift_samples), rec};
}

std::pair<StereoClip, AugmentRecord> time_shift(const StereoClip& clip, int bound, int quantum,
                                                std::uint64_t seed) {
  require(static_cast<std::size_t>(bound) < clip.size(), "time_shift: bound exceeds clip length");
  AugmentRecord rec;
  Rng rng(hash_combine(seed, 0x73686674ULL));
  rec.shift_samples = draw_shift(bound, quantum, rng);
  return {StereoClip{circular_shift(clip.left, rec.shift_samples),
                     circular_shift(clip.right, rec.shift_samples)},
          rec};
}

std::pair<MonoClip, AugmentRecord> noise_aug(const MonoClip& clip, double snr_lo, double snr_hi,
                                             std::uint64_t seed) {
  AugmentRecord rec;
  Rng rng(hash_combine(seed, 0x6e6f6973ULL));
  rec.noise_snr_db = rng.uniform(snr_lo, snr_hi);
  return {add_noise(clip, *rec.noise_snr_db, rng.fork(1).seed()), rec};
}

std::pair<StereoClip, AugmentRecord> noise_aug(const StereoClip& clip, double snr_lo,
                                               double snr_hi, std::uint64_t seed) {
  AugmentRecord rec;
  Rng rng(hash_combine(seed, 0x6e6f6973ULL));
  rec.noise_snr_db = rng.uniform(snr_lo, snr_hi);
  return {add_noise(clip, *rec.noise_snr_db, rng.fork(1).seed()), rec};
}

namespace {

// A direct-path-aligned impulse response for a random preset room at the
// sampled RT60. rt60 = 0 degenerates to a unit impulse.
std::vector<double> aug_rir(double rt60, double rate, Rng& rng) {
  RoomConfig room = room_preset(static_cast<int>(rng.uniform_int(1, 3)));
  room.rt60 = rt60;
  SourceSpec spec;
  spec.angle_deg = rng.uniform(-80.0, 80.0);
  spec.distance_m = rng.uniform(0.5, 2.0);
  const Vec3 pos = source_position(room, spec);
  return build_rir(room, pos, room.mic_left, rate, rt60 > 0 ? kImageOrder : 0,
                   /*align_direct=*/true);
}

}  // namespace

std::pair<MonoClip, AugmentRecord> reverb_aug(const MonoClip& clip, double rt60_lo, double rt60_hi,
                                              std::uint64_t seed) {
  AugmentRecord rec;
  Rng rng(hash_combine(seed, 0x72766232ULL));
  rec.rt60_applied = rng.uniform(rt60_lo, rt60_hi);
  const auto ir = aug_rir(*rec.rt60_applied, clip.rate, rng);
  return {convolve(clip, ir), rec};
}

std::pair<StereoClip, AugmentRecord> reverb_aug(const StereoClip& clip, double rt60_lo,
                                                double rt60_hi, std::uint64_t seed) {
  AugmentRecord rec;
  Rng rng(hash_combine(seed, 0x72766232ULL));
  rec.rt60_applied = rng.uniform(rt60_lo, rt60_hi);
  // One response for both channels: interaural alignment must be preserved.
  const auto ir = aug_rir(*rec.rt60_applied, clip.rate(), rng);
  return {StereoClip{convolve(clip.left, ir), convolve(clip.right, ir)}, rec};
}

std::pair<MonoClip, AugmentRecord> mixture_aug(const MonoClip& clip,
                                               const std::vector<MonoClip>& pool, double lo,
                                               double hi, std::uint64_t seed) {
  require(!pool.empty(), "mixture_aug: empty distractor pool");
  AugmentRecord rec;
  Rng rng(hash_combine(seed, 0x6d697874ULL));
  rec.mixture_intensity = rng.uniform(lo, hi);
  const MonoClip& pick = pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
  require(pick.size() >= clip.size() && pick.rate == clip.rate,
          "mixture_aug: pool clip shorter than the input or rate mismatch");
  const double target = clip.rms();
  require(target > 0, "mixture_aug: silent input clip");
  double dist_power = 0.0;
  for (std::size_t i = 0; i < clip.size(); ++i) dist_power += pick.samples[i] * pick.samples[i];
  dist_power /= static_cast<double>(clip.size());
  require(dist_power > 0, "mixture_aug: silent distractor");
  const double scale = *rec.mixture_intensity * target / std::sqrt(dist_power);
  MonoClip out = clip;
  for (std::size_t i = 0; i < out.size(); ++i) out.samples[i] += scale * pick.samples[i];
  return {std::move(out), rec};
}

std::pair<StereoClip, AugmentRecord> mixture_aug(const StereoClip& clip,
                                                 const std::vector<StereoClip>& pool, double lo,
                                                 double hi, std::uint64_t seed) {
  require(!pool.empty(), "mixture_aug: empty distractor pool");
  AugmentRecord rec;
  Rng rng(hash_combine(seed, 0x6d697874ULL));
  rec.mixture_intensity = rng.uniform(lo, hi);
  const StereoClip& pick =
      pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
  require(pick.size() >= clip.size() && pick.rate() == clip.rate(),
          "mixture_aug: pool clip shorter than the input or rate mismatch");
  StereoClip cropped;
  cropped.left.rate = cropped.right.rate = clip.rate();
  cropped.left.samples.assign(pick.left.samples.begin(), pick.left.samples.begin() + clip.size());
  cropped.right.samples.assign(pick.right.samples.begin(),
                               pick.right.samples.begin() + clip.size());
  return {make_mixture(clip, cropped, *rec.mixture_intensity), rec};
}

namespace {

void merge(AugmentRecord& into, const AugmentRecord& from) {
  into.swapped = into.swapped != from.swapped;
  into.scale_left *= from.scale_left;
  into.scale_right *= from.scale_right;
  into.shift_samples += from.shift_samples;
  if (from.noise_snr_db) into.noise_snr_db = from.noise_snr_db;
  if (from.rt60_applied) into.rt60_applied = from.rt60_applied;
  if (from.mixture_intensity) into.mixture_intensity = from.mixture_intensity;
}

void check_side(const AugmentConfig& cfg, Side side) {
  cfg.validate();
  if (side == Side::Clean) {
    require(!cfg.shift, "pipeline: time shift on a clean side cannot be undone by the loss");
    require(!cfg.noise && !cfg.reverb && !cfg.mixture,
            "pipeline: noise/reverb/mixture requested on a clean side");
  }
}

}  // namespace

std::pair<StereoClip, AugmentRecord> pipeline(const StereoClip& clip, const AugmentConfig& cfg,
                                              Side side, std::uint64_t seed,
                                              const std::vector<StereoClip>* mixture_pool) {
  check_side(cfg, side);
  StereoClip cur = clip;
  AugmentRecord rec;
  if (cfg.swap) {
    auto [c, r] = channel_swap(cur, cfg.swap_p, hash_combine(seed, 1));
    cur = std::move(c);
    merge(rec, r);
  }
  if (cfg.scale) {
    auto [c, r] = channel_scale(cur, cfg.scale_lo, cfg.scale_hi, hash_combine(seed, 2));
    cur = std::move(c);
    merge(rec, r);
  }
  if (cfg.shift) {
    auto [c, r] = time_shift(cur, cfg.shift_bound, cfg.shift_quantum, hash_combine(seed, 3));
    cur = std::move(c);
    merge(rec, r);
  }
  if (cfg.noise) {
    auto [c, r] = noise_aug(cur, cfg.noise_snr_lo, cfg.noise_snr_hi, hash_combine(seed, 4));
    cur = std::move(c);
    merge(rec, r);
  }
  if (cfg.reverb) {
    auto [c, r] = reverb_aug(cur, cfg.reverb_rt60_lo, cfg.reverb_rt60_hi, hash_combine(seed, 5));
    cur = std::move(c);
    merge(rec, r);
  }
  if (cfg.mixture) {
    require(mixture_pool != nullptr, "pipeline: mixture enabled without a pool");
    auto [c, r] =
        mixture_aug(cur, *mixture_pool, cfg.mixture_lo, cfg.mixture_hi, hash_combine(seed, 6));
    cur = std::move(c);
    merge(rec, r);
  }
  return {std::move(cur), rec};
}

std::pair<MonoClip, AugmentRecord> pipeline(const MonoClip& clip, const AugmentConfig& cfg,
                                            Side side, std::uint64_t seed,
                                            const std::vector<MonoClip>* mixture_pool) {
  check_side(cfg, side);
  MonoClip cur = clip;
  AugmentRecord rec;
  // Channel swap does not apply to mono clips.
  if (cfg.scale) {
    auto [c, r] = channel_scale(cur, cfg.scale_lo, cfg.scale_hi, hash_combine(seed, 2));
    cur = std::move(c);
    merge(rec, r);
  }
  if (cfg.shift) {
    auto [c, r] = time_shift(cur, cfg.shift_bound, cfg.shift_quantum, hash_combine(seed, 3));
    cur = std::move(c);
    merge(rec, r);
  }
  if (cfg.noise) {
    auto [c, r] = noise_aug(cur, cfg.noise_snr_lo, cfg.noise_snr_hi, hash_combine(seed, 4));
    cur = std::move(c);
    merge(rec, r);
  }
  if (cfg.reverb) {
    auto [c, r] = reverb_aug(cur, cfg.reverb_rt60_lo, cfg.reverb_rt60_hi, hash_combine(seed, 5));
    cur = std::move(c);
    merge(rec, r);
  }
  if (cfg.mixture) {
    require(mixture_pool != nullptr, "pipeline: mixture enabled without a pool");
    auto [c, r] =
        mixture_aug(cur, *mixture_pool, cfg.mixture_lo, cfg.mixture_hi, hash_combine(seed, 6));
    cur = std::move(c);
    merge(rec, r);
  }
  return {std::move(cur), rec};
}

}  // namespace tde
