#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tdekit/audio.hpp"
#include "tdekit/common.hpp"
#include "tdekit/sim.hpp"

namespace tde {

/// What a pipeline run actually did, with enough detail to undo time shifts
/// and to transform ground-truth labels.
struct AugmentRecord {
  bool swapped = false;
  double scale_left = 1.0;   // for mono clips only scale_left is used
  double scale_right = 1.0;
  int shift_samples = 0;
  std::optional<double> noise_snr_db;
  std::optional<double> rt60_applied;
  std::optional<double> mixture_intensity;
};

/// Ground-truth delay after an augmentation: channel swaps negate it,
/// everything else leaves it unchanged.
inline double effective_tdoa(const AugmentRecord& rec, double tau) {
  return rec.swapped ? -tau : tau;
}

struct AugmentConfig {
  bool swap = false;
  double swap_p = 0.5;
  bool scale = false;
  double scale_lo = 0.5, scale_hi = 1.5;
  bool shift = false;
  int shift_bound = 16;    // samples, inclusive, both signs
  int shift_quantum = 1;   // shifts are drawn as multiples of this
  bool noise = false;
  double noise_snr_lo = 0.0, noise_snr_hi = 30.0;  // dB
  bool reverb = false;
  double reverb_rt60_lo = 0.0, reverb_rt60_hi = 0.9;  // seconds
  bool mixture = false;
  double mixture_lo = 0.1, mixture_hi = 1.0;  // distractor loudness ratio

  void validate() const;
};

/// Which role the clip plays in the loss. Clean sides must not be configured
/// with shift, noise, reverb or mixture; the pipeline rejects such configs.
enum class Side { Clean, Augmented };

// Individual augmentations. Each is a deterministic function of
// (input, parameters, seed).

std::pair<StereoClip, AugmentRecord> channel_swap(const StereoClip& clip, double p,
                                                  std::uint64_t seed);
std::pair<StereoClip, AugmentRecord> channel_scale(const StereoClip& clip, double lo, double hi,
                                                   std::uint64_t seed);
std::pair<MonoClip, AugmentRecord> channel_scale(const MonoClip& clip, double lo, double hi,
                                                 std::uint64_t seed);
/// Integer circular shift; positive shifts move content toward later samples.
std::pair<MonoClip, AugmentRecord> time_shift(const MonoClip& clip, int bound, int quantum,
                                              std::uint64_t seed);
std::pair<StereoClip, AugmentRecord> time_shift(const StereoClip& clip, int bound, int quantum,
                                                std::uint64_t seed);
std::pair<MonoClip, AugmentRecord> noise_aug(const MonoClip& clip, double snr_lo, double snr_hi,
                                             std::uint64_t seed);
std::pair<StereoClip, AugmentRecord> noise_aug(const StereoClip& clip, double snr_lo,
                                               double snr_hi, std::uint64_t seed);
/// Convolves with a synthetic room response at a sampled RT60. The response
/// is direct-path aligned and normalized, so time alignment and rough level
/// are preserved; rt60 = 0 is the identity.
std::pair<MonoClip, AugmentRecord> reverb_aug(const MonoClip& clip, double rt60_lo, double rt60_hi,
                                              std::uint64_t seed);
std::pair<StereoClip, AugmentRecord> reverb_aug(const StereoClip& clip, double rt60_lo,
                                                double rt60_hi, std::uint64_t seed);
std::pair<MonoClip, AugmentRecord> mixture_aug(const MonoClip& clip,
                                               const std::vector<MonoClip>& pool, double lo,
                                               double hi, std::uint64_t seed);
std::pair<StereoClip, AugmentRecord> mixture_aug(const StereoClip& clip,
                                                 const std::vector<StereoClip>& pool, double lo,
                                                 double hi, std::uint64_t seed);

/// Applies the configured subset in fixed order: swap, scale, shift, noise,
/// reverb, mixture. Clean sides reject configs enabling anything past scale.
std::pair<StereoClip, AugmentRecord> pipeline(const StereoClip& clip, const AugmentConfig& cfg,
                                              Side side, std::uint64_t seed,
                                              const std::vector<StereoClip>* mixture_pool = nullptr);
std::pair<MonoClip, AugmentRecord> pipeline(const MonoClip& clip, const AugmentConfig& cfg,
                                            Side side, std::uint64_t seed,
                                            const std::vector<MonoClip>* mixture_pool = nullptr);

}  // namespace tde
