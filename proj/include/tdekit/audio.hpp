#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "tdekit/common.hpp"

namespace tde {

/// Single-channel waveform. Samples are dimensionless amplitudes, nominally
/// in [-1, 1]; rate is in samples per second.
struct MonoClip {
  std::vector<double> samples;
  double rate = 16000.0;

  std::size_t size() const { return samples.size(); }
  double duration_s() const { return static_cast<double>(samples.size()) / rate; }
  double rms() const;
  double power() const;  // mean squared sample
  void validate() const;
};

/// Two aligned channels at the same rate.
struct StereoClip {
  MonoClip left;
  MonoClip right;

  std::size_t size() const { return left.samples.size(); }
  double rate() const { return left.rate; }
  void validate() const;
};

/// Magnitude + phase time-frequency image, fixed 128 x 128 x 2.
/// Storage is plane-major: plane 0 holds magnitudes, plane 1 phases, each a
/// row-major [bin][frame] grid. Phase angles lie in (-pi, pi].
struct Spectrogram {
  static constexpr int kBins = 128;
  static constexpr int kFrames = 128;
  static constexpr int kComponents = 2;

  std::vector<double> values;  // size kComponents * kBins * kFrames

  Spectrogram() : values(static_cast<std::size_t>(kComponents) * kBins * kFrames, 0.0) {}

  double& at(int bin, int frame, int comp) {
    return values[(static_cast<std::size_t>(comp) * kBins + bin) * kFrames + frame];
  }
  double at(int bin, int frame, int comp) const {
    return values[(static_cast<std::size_t>(comp) * kBins + bin) * kFrames + frame];
  }
  const double* plane(int comp) const { return values.data() + static_cast<std::size_t>(comp) * kBins * kFrames; }
};

enum class WavFormat { Pcm16, Float32 };

/// Reads a RIFF WAV file (PCM-16 or IEEE float-32, 1 or 2 channels).
/// PCM samples are scaled by 1/32768 so that a save/load round trip of
/// PCM-16 data is bit-exact.
std::variant<MonoClip, StereoClip> load_wav(const std::string& path);

/// Convenience wrappers that reject the other channel count.
StereoClip load_wav_stereo(const std::string& path);
MonoClip load_wav_mono(const std::string& path);

void save_wav(const MonoClip& clip, const std::string& path, WavFormat fmt = WavFormat::Pcm16);
void save_wav(const StereoClip& clip, const std::string& path, WavFormat fmt = WavFormat::Pcm16);

/// Band-limited resampling with a 64-tap windowed-sinc kernel. Output length
/// is round(n * target / source). Same-rate input is returned unchanged.
MonoClip resample(const MonoClip& clip, double target_rate);
StereoClip resample(const StereoClip& clip, double target_rate);

/// Slides a window of `window` samples with hop `step`; returns
/// floor((n - window) / step) windows, window k covering samples
/// [k*step, k*step + window).
std::vector<MonoClip> extract_windows(const MonoClip& clip, int window, int step);

/// Number of windows extract_windows will produce.
inline std::size_t window_count(std::size_t n, int window, int step) {
  require(window > 0 && step >= 1, "window_count: window and step must be positive");
  require(static_cast<std::size_t>(window) <= n, "window_count: window longer than clip");
  return (n - static_cast<std::size_t>(window)) / static_cast<std::size_t>(step);
}

/// Centered STFT of one analysis window: FFT size 256, hop floor(L/128),
/// Hann window, reflection padding; 129 bins truncated to the lowest 128
/// (Nyquist dropped) and exactly 128 frames kept.
Spectrogram stft_features(const MonoClip& window);

MonoClip crop(const MonoClip& clip, std::size_t offset, std::size_t length);
StereoClip crop(const StereoClip& clip, std::size_t offset, std::size_t length);
/// The centered length-`length` portion of the clip.
StereoClip crop_center(const StereoClip& clip, std::size_t length);

}  // namespace tde
