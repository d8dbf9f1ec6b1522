#include "tdekit/audio.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <unsupported/Eigen/FFT>

namespace tde {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double MonoClip::rms() const { return std::sqrt(power()); }

double MonoClip::power() const {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (double s : samples) acc += s * s;
  return acc / static_cast<double>(samples.size());
}

void MonoClip::validate() const {
  require(rate > 0, "MonoClip: rate must be positive");
  for (double s : samples)
    require(std::isfinite(s), "MonoClip: non-finite sample");
}

void StereoClip::validate() const {
  left.validate();
  right.validate();
  require(left.samples.size() == right.samples.size(), "StereoClip: channel lengths differ");
  require(left.rate == right.rate, "StereoClip: channel rates differ");
}

// ---------------------------------------------------------------------------
// WAV I/O
// ---------------------------------------------------------------------------

namespace {

template <typename T>
T read_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  T out;
  std::memcpy(&out, &v, sizeof(T));
  return out;
}

template <typename T>
void write_le(std::ostream& out, T value) {
  std::uint64_t v = 0;
  std::memcpy(&v, &value, sizeof(T));
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

struct WavData {
  int channels = 0;
  double rate = 0;
  std::vector<std::vector<double>> chan;  // per-channel samples
};

WavData read_wav_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "load_wav: cannot open '" + path + "'");

  char tag[4];
  in.read(tag, 4);
  require(in.good() && std::memcmp(tag, "RIFF", 4) == 0, "load_wav: not a RIFF file: " + path);
  (void)read_le<std::uint32_t>(in);
  in.read(tag, 4);
  require(in.good() && std::memcmp(tag, "WAVE", 4) == 0, "load_wav: not a WAVE file: " + path);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::vector<char> data;

  while (in.read(tag, 4)) {
    const std::uint32_t chunk_size = read_le<std::uint32_t>(in);
    if (!in.good()) break;
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = read_le<std::uint16_t>(in);
      channels = read_le<std::uint16_t>(in);
      rate = read_le<std::uint32_t>(in);
      (void)read_le<std::uint32_t>(in);  // byte rate
      (void)read_le<std::uint16_t>(in);  // block align
      bits = read_le<std::uint16_t>(in);
      if (format == 0xFFFE && chunk_size >= 40) {
        (void)read_le<std::uint16_t>(in);  // extension size
        (void)read_le<std::uint16_t>(in);  // valid bits
        (void)read_le<std::uint32_t>(in);  // channel mask
        format = read_le<std::uint16_t>(in);  // first two bytes of the subformat GUID
        in.ignore(14);
        if (chunk_size > 40) in.ignore(chunk_size - 40);
      } else if (chunk_size > 16) {
        in.ignore(chunk_size - 16);
      }
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data.resize(chunk_size);
      in.read(data.data(), chunk_size);
      require(in.gcount() == static_cast<std::streamsize>(chunk_size),
              "load_wav: truncated data chunk in " + path);
      break;
    } else {
      in.ignore(chunk_size + (chunk_size & 1));
    }
  }

  require(have_fmt, "load_wav: missing fmt chunk in " + path);
  require(channels == 1 || channels == 2, "load_wav: unsupported channel count in " + path);
  require((format == 1 && bits == 16) || (format == 3 && bits == 32),
          "load_wav: unsupported encoding in " + path + " (need PCM-16 or float-32)");
  require(!data.empty(), "load_wav: zero-length audio in " + path);

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frames = data.size() / (bytes_per_sample * channels);
  require(frames > 0, "load_wav: zero-length audio in " + path);

  WavData out;
  out.channels = channels;
  out.rate = static_cast<double>(rate);
  out.chan.assign(channels, std::vector<double>(frames));
  const char* p = data.data();
  for (std::size_t f = 0; f < frames; ++f) {
    for (int c = 0; c < channels; ++c) {
      if (format == 1) {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        out.chan[c][f] = static_cast<double>(v) / 32768.0;
        p += 2;
      } else {
        float v;
        std::memcpy(&v, p, 4);
        out.chan[c][f] = static_cast<double>(v);
        p += 4;
      }
    }
  }
  return out;
}

void write_wav_file(const std::string& path, const std::vector<const std::vector<double>*>& chans,
                    double rate, WavFormat fmt) {
  const int channels = static_cast<int>(chans.size());
  const std::size_t frames = chans[0]->size();
  const std::uint16_t bits = fmt == WavFormat::Pcm16 ? 16 : 32;
  const std::uint16_t block = static_cast<std::uint16_t>(channels * bits / 8);
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(frames * block);

  std::ofstream out(path, std::ios::binary);
  require(out.good(), "save_wav: cannot open '" + path + "' for writing");

  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, fmt == WavFormat::Pcm16 ? 1 : 3);
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(channels));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(std::llround(rate)));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(std::llround(rate)) * block);
  write_le<std::uint16_t>(out, block);
  write_le<std::uint16_t>(out, bits);
  out.write("data", 4);
  write_le<std::uint32_t>(out, data_bytes);

  for (std::size_t f = 0; f < frames; ++f) {
    for (int c = 0; c < channels; ++c) {
      const double s = (*chans[c])[f];
      if (fmt == WavFormat::Pcm16) {
        const double scaled = std::clamp(s * 32768.0, -32768.0, 32767.0);
        write_le<std::int16_t>(out, static_cast<std::int16_t>(std::llround(scaled)));
      } else {
        write_le<float>(out, static_cast<float>(s));
      }
    }
  }
  require(out.good(), "save_wav: write failed for '" + path + "'");
}

}  // namespace

std::variant<MonoClip, StereoClip> load_wav(const std::string& path) {
  WavData w = read_wav_file(path);
  if (w.channels == 1) {
    MonoClip m{std::move(w.chan[0]), w.rate};
    return m;
  }
  StereoClip s{{std::move(w.chan[0]), w.rate}, {std::move(w.chan[1]), w.rate}};
  return s;
}

StereoClip load_wav_stereo(const std::string& path) {
  auto v = load_wav(path);
  require(std::holds_alternative<StereoClip>(v), "load_wav_stereo: '" + path + "' is not stereo");
  return std::get<StereoClip>(std::move(v));
}

MonoClip load_wav_mono(const std::string& path) {
  auto v = load_wav(path);
  require(std::holds_alternative<MonoClip>(v), "load_wav_mono: '" + path + "' is not mono");
  return std::get<MonoClip>(std::move(v));
}

void save_wav(const MonoClip& clip, const std::string& path, WavFormat fmt) {
  require(!clip.samples.empty(), "save_wav: empty clip");
  write_wav_file(path, {&clip.samples}, clip.rate, fmt);
}

void save_wav(const StereoClip& clip, const std::string& path, WavFormat fmt) {
  clip.validate();
  require(clip.size() > 0, "save_wav: empty clip");
  write_wav_file(path, {&clip.left.samples, &clip.right.samples}, clip.rate(), fmt);
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

namespace {

constexpr int kSincHalfWidth = 32;  // 64-tap kernel

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = kPi * x;
  return std::sin(px) / px;
}

// Reflected read beyond the signal edges (no edge repetition).
double reflect_at(const std::vector<double>& x, std::int64_t i) {
  const std::int64_t n = static_cast<std::int64_t>(x.size());
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return x[static_cast<std::size_t>(i)];
}

}  // namespace

MonoClip resample(const MonoClip& clip, double target_rate) {
  require(target_rate > 0, "resample: target rate must be positive");
  clip.validate();
  if (target_rate == clip.rate) return clip;
  require(!clip.samples.empty(), "resample: empty clip");

  const double ratio = target_rate / clip.rate;
  const std::size_t out_n = static_cast<std::size_t>(std::llround(static_cast<double>(clip.size()) * ratio));
  // Cutoff slightly below the narrower Nyquist, in cycles per input sample.
  const double fc = 0.475 * std::min(1.0, ratio);

  MonoClip out;
  out.rate = target_rate;
  out.samples.resize(out_n);
  for (std::size_t j = 0; j < out_n; ++j) {
    const double p = static_cast<double>(j) / ratio;
    const std::int64_t k0 = static_cast<std::int64_t>(std::ceil(p - kSincHalfWidth));
    const std::int64_t k1 = static_cast<std::int64_t>(std::floor(p + kSincHalfWidth));
    double acc = 0.0, wsum = 0.0;
    for (std::int64_t k = k0; k <= k1; ++k) {
      const double t = p - static_cast<double>(k);
      const double w = 0.5 + 0.5 * std::cos(kPi * t / kSincHalfWidth);  // Hann taper
      const double tap = 2.0 * fc * sinc(2.0 * fc * t) * w;
      acc += tap * reflect_at(clip.samples, k);
      wsum += tap;
    }
    // Normalizing by the tap sum keeps unity gain at DC despite the
    // fractional kernel offset.
    out.samples[j] = wsum != 0.0 ? acc / wsum : 0.0;
  }
  return out;
}

StereoClip resample(const StereoClip& clip, double target_rate) {
  return {resample(clip.left, target_rate), resample(clip.right, target_rate)};
}

// ---------------------------------------------------------------------------
// Windowing and STFT
// ---------------------------------------------------------------------------

std::vector<MonoClip> extract_windows(const MonoClip& clip, int window, int step) {
  const std::size_t count = window_count(clip.size(), window, step);
  std::vector<MonoClip> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t begin = k * static_cast<std::size_t>(step);
    MonoClip w;
    w.rate = clip.rate;
    w.samples.assign(clip.samples.begin() + begin, clip.samples.begin() + begin + window);
    out.push_back(std::move(w));
  }
  return out;
}

MonoClip crop(const MonoClip& clip, std::size_t offset, std::size_t length) {
  require(offset + length <= clip.size(), "crop: range exceeds clip length");
  MonoClip out;
  out.rate = clip.rate;
  out.samples.assign(clip.samples.begin() + offset, clip.samples.begin() + offset + length);
  return out;
}

StereoClip crop(const StereoClip& clip, std::size_t offset, std::size_t length) {
  return {crop(clip.left, offset, length), crop(clip.right, offset, length)};
}

StereoClip crop_center(const StereoClip& clip, std::size_t length) {
  require(length <= clip.size(), "crop_center: clip shorter than requested length");
  return crop(clip, (clip.size() - length) / 2, length);
}

namespace {

constexpr int kFftSize = 256;

const std::vector<double>& hann_window_256() {
  static const std::vector<double> w = [] {
    std::vector<double> v(kFftSize);
    for (int i = 0; i < kFftSize; ++i) v[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / kFftSize);
    return v;
  }();
  return w;
}

}  // namespace

Spectrogram stft_features(const MonoClip& window) {
  const std::int64_t n = static_cast<std::int64_t>(window.size());
  require(n >= kFftSize, "stft_features: window shorter than 256 samples");

  const int hop = static_cast<int>(n / Spectrogram::kFrames);
  const auto& hann = hann_window_256();

  thread_local Eigen::FFT<double> fft;
  std::vector<std::complex<double>> in(kFftSize), spec(kFftSize);

  Spectrogram out;
  const int half = kFftSize / 2;
  for (int frame = 0; frame < Spectrogram::kFrames; ++frame) {
    const std::int64_t start = static_cast<std::int64_t>(frame) * hop - half;
    for (int i = 0; i < kFftSize; ++i) {
      // Reflection padding around the window edges keeps the STFT centered.
      std::int64_t idx = start + i;
      if (idx < 0) idx = -idx;
      if (idx >= n) idx = 2 * n - 2 - idx;
      in[i] = window.samples[static_cast<std::size_t>(idx)] * hann[i];
    }
    fft.fwd(spec, in);
    for (int bin = 0; bin < Spectrogram::kBins; ++bin) {
      const std::complex<double> v = spec[bin];
      double phase = std::atan2(v.imag(), v.real());
      if (phase <= -kPi) phase = kPi;  // keep phase in (-pi, pi]
      out.at(bin, frame, 0) = std::abs(v);
      out.at(bin, frame, 1) = phase;
    }
  }
  return out;
}

}  // namespace tde
