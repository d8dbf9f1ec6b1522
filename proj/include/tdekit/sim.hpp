#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "tdekit/audio.hpp"
#include "tdekit/common.hpp"

namespace tde {

using Vec3 = Eigen::Vector3d;

/// Shoebox room with one microphone pair. Positive TDOA means the sound
/// reaches the right microphone first; this sign convention is used
/// project-wide.
struct RoomConfig {
  Vec3 dims{7.0, 6.0, 3.0};             // (X, Y, H) in meters
  Vec3 mic_left{3.4, 1.0, 1.6};
  Vec3 mic_right{3.7, 1.0, 1.6};
  double rt60 = 0.0;                    // seconds; 0 renders anechoic
  double speed_of_sound = 343.0;        // m/s

  double mic_spacing() const { return (mic_right - mic_left).norm(); }
  void validate() const;
};

/// Returns one of the three shipped room presets (id in 1..3).
RoomConfig room_preset(int id);

/// Source placement relative to the microphone pair: angle from broadside
/// (degrees, positive toward the right microphone) and distance from the
/// pair midpoint.
struct SourceSpec {
  double angle_deg = 0.0;    // [-90, 90]
  double distance_m = 1.0;   // [0.5, 3.0] in the shipped protocol
  double gain = 1.0;         // linear scale applied to the source signal
};

/// World position of a source spec; throws if it falls outside the room.
Vec3 source_position(const RoomConfig& room, const SourceSpec& src);

/// Whether the spec's position lies inside the room with the given wall
/// margin (used when sampling placements).
bool source_fits(const RoomConfig& room, const SourceSpec& src, double margin_m = 0.05);

struct Scene {
  RoomConfig room;
  std::vector<SourceSpec> sources;
  double snr_db = 30.0;      // +infinity disables noise
  std::uint64_t seed = 0;

  void validate() const;
};

/// Exact time difference of arrival in seconds:
/// tau = (|p_src - p_left| - |p_src - p_right|) / c.
double ground_truth_tdoa(const RoomConfig& room, const SourceSpec& src);
double ground_truth_tdoa(const RoomConfig& room, const Vec3& src_pos);

/// Sabine inversion alpha = 0.161 * V / (S * RT60), clamped to (0, 0.99].
double rt60_to_absorption(const RoomConfig& room);

/// Image-source reflection order used by render_scene for reverberant rooms.
inline constexpr int kImageOrder = 10;

/// Room impulse response from the image-source method: images up to
/// `max_order` reflections, each contributing (1-alpha)^(order/2) / (4 pi r)
/// at its fractional delay through a 64-tap windowed-sinc kernel.
/// With align_direct the response is shifted so the direct path sits at
/// sample 0 and is scaled to unit direct-path amplitude (used by the
/// reverberation augmentation, which must not alter time alignment).
std::vector<double> build_rir(const RoomConfig& room, const Vec3& src_pos, const Vec3& mic_pos,
                              double rate, int max_order, bool align_direct = false);

/// RT60 measured from the Schroeder backward integral of an impulse
/// response: a line is fit to the decay curve between -5 dB and -15 dB and
/// extrapolated to -60 dB.
double measure_rt60(const std::vector<double>& ir, double rate);

/// Linear convolution truncated to the input length (FFT-based for long
/// kernels).
MonoClip convolve(const MonoClip& x, const std::vector<double>& ir);

struct RenderResult {
  StereoClip audio;
  std::vector<double> tdoas;  // ground-truth tau per source, seconds
};

/// Renders a scene: per source and microphone an image-source impulse
/// response (direct path only when rt60 = 0), convolution, summation, and
/// calibrated noise. Deterministic in (scene, signals).
RenderResult render_scene(const Scene& scene, const std::vector<MonoClip>& signals);

/// Adds i.i.d. Gaussian noise, independent per channel, scaled so that
/// 10*log10(P_signal / P_noise) = snr_db on each channel.
StereoClip add_noise(const StereoClip& clip, double snr_db, std::uint64_t seed);
MonoClip add_noise(const MonoClip& clip, double snr_db, std::uint64_t seed);

/// Rescales the distractor to `intensity` times the dominant clip's RMS
/// (pooled over both channels) and sums channel-wise.
StereoClip make_mixture(const StereoClip& dominant, const StereoClip& distractor, double intensity);

/// Gaussian white noise at RMS 0.2.
MonoClip white_noise(std::size_t n, double rate, std::uint64_t seed);

/// Speech-like test signal: formant-filtered noise shaped by a random
/// syllable-rate burst envelope, with a low noise floor between bursts.
MonoClip speechlike_source(std::size_t n, double rate, std::uint64_t seed);

}  // namespace tde
