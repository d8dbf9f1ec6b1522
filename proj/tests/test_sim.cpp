#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tdekit/gcc.hpp"
#include "tdekit/sim.hpp"

using namespace tde;

TEST_CASE("tdoa is zero on the broadside axis") {
  const RoomConfig room = room_preset(1);
  CHECK(std::abs(ground_truth_tdoa(room, SourceSpec{0.0, 1.5, 1.0})) < 1e-15);
}

TEST_CASE("tdoa of a collinear source equals spacing over c") {
  // Room 1 mics are 0.3 m apart along x; a +90 degree source sits on the
  // axis beyond the right mic, so the path difference is the full spacing.
  const RoomConfig room = room_preset(1);
  const double tau = ground_truth_tdoa(room, SourceSpec{90.0, 1.0, 1.0});
  CHECK(tau == doctest::Approx(0.3 / 343.0).epsilon(1e-12));
}

TEST_CASE("tdoa negates under source mirroring and mic swap") {
  const RoomConfig room = room_preset(1);
  for (double angle : {10.0, 35.0, 71.0}) {
    const double tau_pos = ground_truth_tdoa(room, SourceSpec{angle, 2.0, 1.0});
    const double tau_neg = ground_truth_tdoa(room, SourceSpec{-angle, 2.0, 1.0});
    CHECK(tau_pos == doctest::Approx(-tau_neg).epsilon(1e-12));

    RoomConfig swapped = room;
    std::swap(swapped.mic_left, swapped.mic_right);
    // Mirror the angle too: the broadside frame flips with the mics.
    const double tau_swapped = ground_truth_tdoa(swapped, SourceSpec{-angle, 2.0, 1.0});
    CHECK(tau_swapped == doctest::Approx(-tau_pos).epsilon(1e-12));
  }
}

TEST_CASE("tdoa respects the geometric bound") {
  for (int room_id = 1; room_id <= 3; ++room_id) {
    const RoomConfig room = room_preset(room_id);
    Rng rng(100 + room_id);
    const double bound = room.mic_spacing() / room.speed_of_sound;
    for (int i = 0; i < 200; ++i) {
      SourceSpec spec{rng.uniform(-90.0, 90.0), rng.uniform(0.5, 3.0), 1.0};
      if (!source_fits(room, spec)) continue;
      CHECK(std::abs(ground_truth_tdoa(room, spec)) <= bound + 1e-12);
    }
  }
}

TEST_CASE("tdoa rejects a source on top of a microphone") {
  RoomConfig room = room_preset(1);
  CHECK_THROWS_AS(ground_truth_tdoa(room, room.mic_left), Error);
}

TEST_CASE("sabine inversion") {
  RoomConfig room = room_preset(1);  // 7 x 6 x 3
  room.rt60 = 0.5;
  // alpha = 0.161 * V / (S * RT60) with V = 126, S = 162.
  const double expected = 0.161 * 126.0 / (162.0 * 0.5);
  CHECK(rt60_to_absorption(room) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(rt60_to_absorption(room) == doctest::Approx(0.2504).epsilon(2e-3));

  room.rt60 = 1e-3;  // would exceed 1; clamped
  CHECK(rt60_to_absorption(room) == 0.99);

  room.rt60 = 1e9;  // long decay: alpha -> 0+
  CHECK(rt60_to_absorption(room) < 1e-8);
  CHECK(rt60_to_absorption(room) > 0.0);

  room.rt60 = 0.0;
  CHECK_THROWS_AS(rt60_to_absorption(room), Error);
}

TEST_CASE("anechoic render puts the correlation peak at the true delay") {
  // 100 random scenes across the three presets; the cross-correlation argmax
  // must sit within one sample of tau * rate.
  int scenes_done = 0;
  Rng rng(2024);
  while (scenes_done < 100) {
    const int room_id = 1 + static_cast<int>(rng.uniform_int(0, 2));
    Scene scene;
    scene.room = room_preset(room_id);
    scene.snr_db = std::numeric_limits<double>::infinity();
    scene.seed = rng.next_u64();
    SourceSpec spec{rng.uniform(-90.0, 90.0), rng.uniform(0.5, 3.0), 1.0};
    if (!source_fits(scene.room, spec)) continue;
    scene.sources = {spec};

    const auto sig = white_noise(4096, 16000, rng.next_u64());
    const RenderResult r = render_scene(scene, {sig});
    const int max_lag =
        default_max_lag(scene.room.mic_spacing(), scene.room.speed_of_sound, 16000.0);
    const int peak = cross_correlation(r.audio.left, r.audio.right, max_lag).argmax_lag();
    const double expected = r.tdoas[0] * 16000.0;
    CHECK(std::abs(peak - expected) <= 1.0);
    ++scenes_done;
  }
}

TEST_CASE("schroeder decay of the rendered impulse response matches RT60") {
  // Measured in room 2, whose Sabine absorption stays low enough for the
  // statistical decay model to hold at both targets.
  for (double target : {0.3, 0.5}) {
    RoomConfig room = room_preset(2);
    room.rt60 = target;
    const Vec3 src = source_position(room, SourceSpec{25.0, 1.5, 1.0});
    const auto ir = build_rir(room, src, room.mic_left, 16000.0, kImageOrder);
    const double measured = measure_rt60(ir, 16000.0);
    CHECK(measured == doctest::Approx(target).epsilon(0.20));
  }
}

TEST_CASE("render is deterministic and zero-gain sources vanish") {
  Scene scene;
  scene.room = room_preset(1);
  scene.room.rt60 = 0.3;
  scene.snr_db = 20.0;
  scene.seed = 99;
  scene.sources = {SourceSpec{30.0, 1.2, 1.0}};
  const auto sig1 = speechlike_source(2000, 16000, 7);

  const RenderResult a = render_scene(scene, {sig1});
  const RenderResult b = render_scene(scene, {sig1});
  REQUIRE(a.audio.size() == b.audio.size());
  for (std::size_t i = 0; i < a.audio.size(); ++i) {
    CHECK(a.audio.left.samples[i] == b.audio.left.samples[i]);
    CHECK(a.audio.right.samples[i] == b.audio.right.samples[i]);
  }

  Scene two = scene;
  two.sources.push_back(SourceSpec{-40.0, 2.0, 0.0});  // zero gain
  const auto sig2 = speechlike_source(2000, 16000, 8);
  const RenderResult c = render_scene(two, {sig1, sig2});
  for (std::size_t i = 0; i < a.audio.size(); ++i) {
    CHECK(c.audio.left.samples[i] == a.audio.left.samples[i]);
    CHECK(c.audio.right.samples[i] == a.audio.right.samples[i]);
  }
  CHECK(c.tdoas.size() == 2);
}

TEST_CASE("add_noise calibration") {
  const MonoClip clean = white_noise(16000, 16000, 42);

  for (double snr : {0.0, 30.0}) {
    const MonoClip noisy = add_noise(clean, snr, 77);
    double noise_power = 0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
      const double d = noisy.samples[i] - clean.samples[i];
      noise_power += d * d;
    }
    noise_power /= static_cast<double>(clean.size());
    const double measured_snr = 10.0 * std::log10(clean.power() / noise_power);
    CHECK(std::abs(measured_snr - snr) < 0.1);
  }

  MonoClip silent;
  silent.rate = 16000;
  silent.samples.assign(100, 0.0);
  CHECK_THROWS_AS(add_noise(silent, 10.0, 1), Error);
}

TEST_CASE("stereo noise channels are independent") {
  StereoClip clip{white_noise(16000, 16000, 1), white_noise(16000, 16000, 2)};
  const StereoClip noisy = add_noise(clip, 0.0, 5);
  // Correlation of the two injected noise sequences.
  double sl = 0, sr = 0, sll = 0, srr = 0, slr = 0;
  const double n = static_cast<double>(clip.size());
  for (std::size_t i = 0; i < clip.size(); ++i) {
    const double a = noisy.left.samples[i] - clip.left.samples[i];
    const double b = noisy.right.samples[i] - clip.right.samples[i];
    sl += a;
    sr += b;
    sll += a * a;
    srr += b * b;
    slr += a * b;
  }
  const double cov = slr / n - (sl / n) * (sr / n);
  const double var_l = sll / n - (sl / n) * (sl / n);
  const double var_r = srr / n - (sr / n) * (sr / n);
  CHECK(std::abs(cov / std::sqrt(var_l * var_r)) < 0.05);
}

TEST_CASE("make_mixture calibration and limits") {
  StereoClip dom{speechlike_source(4000, 16000, 11), speechlike_source(4000, 16000, 12)};
  StereoClip dis{speechlike_source(4000, 16000, 13), speechlike_source(4000, 16000, 14)};

  const StereoClip mixed = make_mixture(dom, dis, 0.5);
  double dist_power = 0, dom_power = 0;
  for (std::size_t i = 0; i < dom.size(); ++i) {
    const double dl = mixed.left.samples[i] - dom.left.samples[i];
    const double dr = mixed.right.samples[i] - dom.right.samples[i];
    dist_power += dl * dl + dr * dr;
    dom_power += dom.left.samples[i] * dom.left.samples[i] +
                 dom.right.samples[i] * dom.right.samples[i];
  }
  CHECK(std::sqrt(dist_power / dom_power) == doctest::Approx(0.5).epsilon(1e-6));

  // Self-mixture at full intensity doubles the signal.
  const StereoClip doubled = make_mixture(dom, dom, 1.0);
  for (std::size_t i = 0; i < dom.size(); ++i)
    CHECK(doubled.left.samples[i] == doctest::Approx(2.0 * dom.left.samples[i]).epsilon(1e-12));

  // Vanishing intensity approaches the dominant clip.
  const StereoClip faint = make_mixture(dom, dis, 1e-9);
  for (std::size_t i = 0; i < dom.size(); i += 97)
    CHECK(faint.left.samples[i] == doctest::Approx(dom.left.samples[i]).epsilon(1e-6));

  StereoClip silent;
  silent.left.samples.assign(4000, 0.0);
  silent.right.samples.assign(4000, 0.0);
  silent.left.rate = silent.right.rate = 16000;
  CHECK_THROWS_AS(make_mixture(silent, dis, 0.5), Error);
}

TEST_CASE("build_rir integer-alignment and direct-path normalization") {
  RoomConfig room = room_preset(1);
  room.rt60 = 0.0;
  const Vec3 src = source_position(room, SourceSpec{20.0, 1.0, 1.0});
  const auto ir = build_rir(room, src, room.mic_left, 16000.0, 0, /*align_direct=*/true);
  // Direct-aligned anechoic responses collapse to a unit impulse at zero.
  REQUIRE(!ir.empty());
  CHECK(ir[0] == doctest::Approx(1.0).epsilon(1e-9));
  double rest = 0;
  for (std::size_t i = 1; i < ir.size(); ++i) rest = std::max(rest, std::abs(ir[i]));
  CHECK(rest < 1e-9);
}
