#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "tdekit/audio.hpp"
#include "tdekit/common.hpp"

using namespace tde;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string temp_file(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

MonoClip sine(double freq, double rate, std::size_t n, double amp = 0.5) {
  MonoClip c;
  c.rate = rate;
  c.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) c.samples[i] = amp * std::sin(2.0 * kPi * freq * i / rate);
  return c;
}

MonoClip noise(std::size_t n, double rate, std::uint64_t seed, double amp = 0.4) {
  Rng rng(seed);
  MonoClip c;
  c.rate = rate;
  c.samples.resize(n);
  for (auto& s : c.samples) s = amp * rng.normal();
  return c;
}

// Quantize to the PCM-16 grid so a save/load round trip starts from
// representable values.
MonoClip quantized(MonoClip c) {
  for (auto& s : c.samples)
    s = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0) / 32768.0;
  return c;
}

}  // namespace

TEST_CASE("wav round trip: stereo pcm16, 1220 frames at 16 kHz") {
  StereoClip clip{quantized(noise(1220, 16000, 1)), quantized(noise(1220, 16000, 2))};
  const std::string path = temp_file("tdekit_rt.wav");
  save_wav(clip, path, WavFormat::Pcm16);

  const StereoClip back = load_wav_stereo(path);
  CHECK(back.size() == 1220);
  CHECK(back.rate() == 16000.0);
  // PCM-16 round trips bit-exactly from quantized input.
  for (std::size_t i = 0; i < clip.size(); ++i) {
    CHECK(back.left.samples[i] == clip.left.samples[i]);
    CHECK(back.right.samples[i] == clip.right.samples[i]);
  }
}

TEST_CASE("wav channel-count dispatch and rate preservation") {
  const std::string mono_path = temp_file("tdekit_mono.wav");
  save_wav(noise(500, 16000, 3), mono_path);
  CHECK(std::holds_alternative<MonoClip>(load_wav(mono_path)));

  const std::string hi_path = temp_file("tdekit_hi.wav");
  save_wav(StereoClip{noise(400, 44100, 4), noise(400, 44100, 5)}, hi_path, WavFormat::Float32);
  const auto v = load_wav(hi_path);
  REQUIRE(std::holds_alternative<StereoClip>(v));
  CHECK(std::get<StereoClip>(v).rate() == 44100.0);

  CHECK_THROWS_AS(load_wav(temp_file("tdekit_missing.wav")), Error);
}

TEST_CASE("wav float32 keeps values to float precision") {
  MonoClip c = noise(300, 16000, 6);
  const std::string path = temp_file("tdekit_f32.wav");
  save_wav(c, path, WavFormat::Float32);
  const MonoClip back = load_wav_mono(path);
  for (std::size_t i = 0; i < c.size(); ++i)
    CHECK(back.samples[i] == doctest::Approx(c.samples[i]).epsilon(1e-7));
}

TEST_CASE("resample identity returns identical samples") {
  const MonoClip c = noise(777, 16000, 7);
  const MonoClip r = resample(c, 16000);
  REQUIRE(r.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(r.samples[i] == c.samples[i]);
}

TEST_CASE("resample 32 kHz sine to 16 kHz against the analytic oracle") {
  const double freq = 440.0;
  const MonoClip src = sine(freq, 32000, 16000);
  const MonoClip out = resample(src, 16000);
  CHECK(out.size() == 8000);

  // Edge guard of one kernel half-width: an FIR resampler cannot know the
  // signal beyond the recording.
  const std::size_t guard = 40;
  double worst = 0.0;
  for (std::size_t j = guard; j + guard < out.size(); ++j) {
    const double expect = 0.5 * std::sin(2.0 * kPi * freq * j / 16000.0);
    worst = std::max(worst, std::abs(out.samples[j] - expect));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("resample halves the length going 16 kHz to 8 kHz") {
  const MonoClip c = noise(1001, 16000, 8);
  const MonoClip r = resample(c, 8000);
  CHECK(std::llabs(static_cast<long long>(r.size()) - 501) <= 1);
  CHECK_THROWS_AS(resample(c, 0.0), Error);
}

TEST_CASE("extract_windows counts follow the floor convention") {
  CHECK(extract_windows(noise(1220, 16000, 9), 1024, 4).size() == 49);
  CHECK(extract_windows(noise(1024, 16000, 10), 1024, 1).empty());
  const auto two = extract_windows(noise(1026, 16000, 11), 1024, 1);
  REQUIRE(two.size() == 2);
  CHECK_THROWS_AS(extract_windows(noise(100, 16000, 12), 1024, 1), Error);
}

TEST_CASE("extract_windows returns exact slices") {
  const MonoClip c = noise(700, 16000, 13);
  const int window = 256, step = 37;
  const auto ws = extract_windows(c, window, step);
  REQUIRE(ws.size() == window_count(c.size(), window, step));
  for (std::size_t k = 0; k < ws.size(); ++k) {
    REQUIRE(ws[k].size() == static_cast<std::size_t>(window));
    for (int i = 0; i < window; ++i) CHECK(ws[k].samples[i] == c.samples[k * step + i]);
  }
}

TEST_CASE("stft shape and zero input") {
  const Spectrogram s = stft_features(noise(1024, 16000, 14));
  CHECK(s.values.size() == 128u * 128u * 2u);

  MonoClip zero;
  zero.rate = 16000;
  zero.samples.assign(1024, 0.0);
  const Spectrogram zs = stft_features(zero);
  for (int b = 0; b < Spectrogram::kBins; ++b)
    for (int f = 0; f < Spectrogram::kFrames; ++f) CHECK(zs.at(b, f, 0) == 0.0);

  CHECK_THROWS_AS(stft_features(noise(200, 16000, 15)), Error);
}

TEST_CASE("stft puts a 1 kHz tone in bin 16") {
  const Spectrogram s = stft_features(sine(1000.0, 16000, 1024));
  // Average the magnitude across frames and find the peak bin.
  int best = 0;
  double best_mag = -1;
  for (int b = 0; b < Spectrogram::kBins; ++b) {
    double acc = 0;
    for (int f = 0; f < Spectrogram::kFrames; ++f) acc += s.at(b, f, 0);
    if (acc > best_mag) {
      best_mag = acc;
      best = b;
    }
  }
  CHECK(best == 16);  // round(1000 / (16000 / 256))
}

TEST_CASE("stft magnitude ignores a circular tone shift, phase does not") {
  // 500 Hz is periodic in 32 samples, so a 8-sample circular shift is a pure
  // quarter-period phase rotation of the same tone.
  const MonoClip a = sine(500.0, 16000, 1024);
  MonoClip b = a;
  std::rotate(b.samples.begin(), b.samples.begin() + 8, b.samples.end());

  const Spectrogram sa = stft_features(a);
  const Spectrogram sb = stft_features(b);
  double mag_diff = 0, phase_diff = 0, mag_scale = 0;
  // Interior frames only: the shift changes which samples reflect at edges.
  for (int b2 = 0; b2 < Spectrogram::kBins; ++b2)
    for (int f = 20; f < Spectrogram::kFrames - 20; ++f) {
      mag_diff = std::max(mag_diff, std::abs(sa.at(b2, f, 0) - sb.at(b2, f, 0)));
      mag_scale = std::max(mag_scale, sa.at(b2, f, 0));
      if (sa.at(b2, f, 0) > 1.0)  // compare phase only where the tone lives
        phase_diff = std::max(phase_diff, std::abs(sa.at(b2, f, 1) - sb.at(b2, f, 1)));
    }
  CHECK(mag_diff < 1e-6 * mag_scale);
  CHECK(phase_diff > 0.5);
}

TEST_CASE("stft phase stays in (-pi, pi]") {
  const Spectrogram s = stft_features(noise(1024, 16000, 16));
  for (int b = 0; b < Spectrogram::kBins; ++b)
    for (int f = 0; f < Spectrogram::kFrames; ++f) {
      CHECK(s.at(b, f, 1) > -kPi - 1e-12);
      CHECK(s.at(b, f, 1) <= kPi + 1e-12);
    }
}

TEST_CASE("stft energy tracks windowed-signal energy (Parseval sanity)") {
  // With 128 of 129 one-sided bins kept, the spectral energy is half the
  // two-sided total: sum |X_k|^2 ~= (N/2) * sum |x_w|^2 with N = 256.
  const double expected_ratio = 128.0;
  for (std::uint64_t seed = 20; seed < 24; ++seed) {
    const MonoClip w = noise(1024, 16000, seed);
    const Spectrogram s = stft_features(w);
    double spec_energy = 0;
    for (int b = 0; b < Spectrogram::kBins; ++b)
      for (int f = 0; f < Spectrogram::kFrames; ++f) spec_energy += s.at(b, f, 0) * s.at(b, f, 0);

    // Windowed-frame energy, replicating the frame/padding layout.
    const int hop = 1024 / 128;
    double sig_energy = 0;
    for (int f = 0; f < Spectrogram::kFrames; ++f) {
      for (int i = 0; i < 256; ++i) {
        std::int64_t idx = static_cast<std::int64_t>(f) * hop - 128 + i;
        if (idx < 0) idx = -idx;
        if (idx >= 1024) idx = 2 * 1024 - 2 - idx;
        const double hann = 0.5 - 0.5 * std::cos(2.0 * kPi * i / 256.0);
        const double v = w.samples[static_cast<std::size_t>(idx)] * hann;
        sig_energy += v * v;
      }
    }
    CHECK(spec_energy / sig_energy == doctest::Approx(expected_ratio).epsilon(0.05));
  }
}

TEST_CASE("crop helpers") {
  const MonoClip c = noise(100, 16000, 30);
  const MonoClip mid = crop(c, 10, 50);
  CHECK(mid.size() == 50);
  CHECK(mid.samples[0] == c.samples[10]);
  CHECK_THROWS_AS(crop(c, 60, 50), Error);
}
