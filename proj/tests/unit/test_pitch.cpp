#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ragaseq/error.hpp"
#include "ragaseq/pitch.hpp"
#include "support/tempdir.hpp"

using namespace ragaseq;

namespace {

constexpr double kRate = 16000.0;

std::vector<float> sine(double hz, double seconds, double amplitude = 0.5) {
  std::vector<float> out(static_cast<std::size_t>(seconds * kRate));
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>(amplitude * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / kRate));
  return out;
}

double median_f0(const PitchContour& c, double t0 = 0.0, double t1 = 1e9) {
  std::vector<double> f;
  for (const auto& fr : c.frames)
    if (fr.voiced() && fr.t >= t0 && fr.t < t1) f.push_back(fr.f0_hz);
  REQUIRE_FALSE(f.empty());
  std::nth_element(f.begin(), f.begin() + static_cast<std::ptrdiff_t>(f.size() / 2), f.end());
  return f[f.size() / 2];
}

}  // namespace

TEST_CASE("pure sines are recovered within 1%") {
  for (double hz : {110.0, 220.0, 440.0}) {
    CAPTURE(hz);
    const auto c = track_pitch(sine(hz, 1.0), kRate);
    CHECK(c.voiced_count() == c.frames.size());
    CHECK(std::abs(median_f0(c) - hz) / hz < 0.01);
  }
}

TEST_CASE("silence is entirely unvoiced") {
  const std::vector<float> silence(16000, 0.0f);
  const auto c = track_pitch(silence, kRate);
  CHECK(c.frames.size() == pitch_frame_count(silence.size(), kRate, {}));
  CHECK(c.voiced_count() == 0);
}

TEST_CASE("white noise is mostly unvoiced") {
  Rng rng(5);
  std::normal_distribution<float> n(0.0f, 0.3f);
  std::vector<float> noise(16000);
  for (auto& x : noise) x = n(rng);
  const auto c = track_pitch(noise, kRate);
  CHECK(static_cast<double>(c.voiced_count()) < 0.2 * static_cast<double>(c.frames.size()));
}

TEST_CASE("a rising glide gives rising half-second medians") {
  const double seconds = 2.0;
  std::vector<float> glide(static_cast<std::size_t>(seconds * kRate));
  double phase = 0.0;
  for (std::size_t i = 0; i < glide.size(); ++i) {
    const double f = 200.0 + 200.0 * static_cast<double>(i) / static_cast<double>(glide.size());
    glide[i] = static_cast<float>(0.5 * std::sin(phase));
    phase += 2.0 * std::numbers::pi * f / kRate;
  }
  const auto c = track_pitch(glide, kRate);
  double previous = 0.0;
  for (int q = 0; q < 4; ++q) {
    const double m = median_f0(c, 0.5 * q, 0.5 * (q + 1));
    CHECK(m > previous);
    previous = m;
  }
}

TEST_CASE("contour does not depend on amplitude") {
  const auto a = track_pitch(sine(196.0, 0.5, 0.5), kRate);
  const auto b = track_pitch(sine(196.0, 0.5, 0.05), kRate);
  REQUIRE(a.frames.size() == b.frames.size());
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    CHECK(a.frames[i].voiced() == b.frames[i].voiced());
    CHECK(a.frames[i].f0_hz == doctest::Approx(b.frames[i].f0_hz).epsilon(1e-4));
  }
}

TEST_CASE("frame timing follows the hop") {
  PitchConfig cfg;
  const auto c = track_pitch(sine(300.0, 0.3), kRate, cfg);
  CHECK(c.frames.size() == pitch_frame_count(4800, kRate, cfg));
  CHECK(c.frames.size() == (4800 - 640) / 160 + 1);
  CHECK(c.frames[1].t - c.frames[0].t == doctest::Approx(0.010));
  CHECK(c.frames[0].t == doctest::Approx(0.020));
}

TEST_CASE("invalid configurations are rejected") {
  PitchConfig cfg;
  cfg.fmin_hz = 700.0;
  CHECK_THROWS_AS(track_pitch(sine(200.0, 0.2), kRate, cfg), Error);
  CHECK_THROWS_AS(track_pitch(std::vector<float>{}, kRate), Error);
}

TEST_CASE("contour CSV round trip") {
  ragaseq::testing::TempDir dir("contour");
  PitchContour c;
  c.hop_s = 0.01;
  c.frames = {{0.02, 220.5, 0.9}, {0.03, kUnvoiced, 0.1}, {0.04, 110.25, 0.8}};
  write_contour_csv(dir / "c.csv", c);
  const auto back = read_contour_csv(dir / "c.csv");
  REQUIRE(back.frames.size() == 3);
  CHECK(back.frames[0].f0_hz == 220.5);
  CHECK_FALSE(back.frames[1].voiced());
  CHECK(back.frames[2].t == 0.04);
  CHECK(back.hop_s == doctest::Approx(0.01));
}
