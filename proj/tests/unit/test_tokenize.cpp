#include "doctest.h"

#include <cmath>

#include "ragaseq/tokenize.hpp"

using namespace ragaseq;

namespace {

PitchContour constant_contour(double f0, std::size_t n) {
  PitchContour c;
  for (std::size_t i = 0; i < n; ++i) c.frames.push_back({0.01 * static_cast<double>(i), f0, 1.0});
  return c;
}

}  // namespace

TEST_CASE("cents relative to the tonic") {
  const double T = 146.83;
  CHECK(normalize_cents(T, T) == 0.0);
  CHECK(normalize_cents(2 * T, T) == doctest::Approx(1200.0));
  CHECK(normalize_cents(T * std::exp2(1.0 / 12.0), T) == doctest::Approx(100.0));
  CHECK(normalize_cents(T / 2, T) == doctest::Approx(-1200.0));
  CHECK_THROWS_AS(normalize_cents(0.0, T), Error);
  CHECK_THROWS_AS(normalize_cents(100.0, -1.0), Error);
}

TEST_CASE("quantization at five levels per half step") {
  const double T = 146.83;
  CHECK(quantize(T, T, 5) == 0);
  CHECK(quantize(T * std::exp2(1.0 / 12.0), T, 5) == 5);
  CHECK(quantize(2 * T, T, 5) == 60);
  CHECK(quantize(T / 2, T, 5) == -60);
  CHECK_THROWS_AS(quantize(T, T, 0), Error);
}

TEST_CASE("halfway values round away from zero") {
  // 10 cents at k = 5 is exactly 0.5 levels.
  const double T = 100.0;
  CHECK(quantize(T * std::exp2(10.0 / 1200.0), T, 5) == 1);
  CHECK(quantize(T * std::exp2(-10.0 / 1200.0), T, 5) == -1);
  CHECK(quantize(T * std::exp2(9.0 / 1200.0), T, 5) == 0);
}

TEST_CASE("vocabulary layout") {
  const Vocabulary v;
  CHECK(v.size() == 243);
  CHECK(v.range() == 120);
  CHECK(v.id_of(-120) == 2);
  CHECK(v.id_of(0) == 122);
  CHECK(v.id_of(120) == 242);
  CHECK(v.id_of(121) == Vocabulary::kOov);
  CHECK(v.id_of(-500) == Vocabulary::kOov);
  CHECK(v.value_of(242) == 120);
  CHECK_FALSE(v.value_of(Vocabulary::kPad).has_value());
  CHECK_FALSE(v.value_of(Vocabulary::kOov).has_value());
  CHECK_FALSE(v.valid_id(243));
  for (int value = -120; value <= 120; ++value) CHECK(v.value_of(v.id_of(value)) == value);

  QuantizerConfig q;
  q.k = 3;
  q.clamp_octaves = 1;
  CHECK(Vocabulary(q).size() == 2 * 36 + 3);
}

TEST_CASE("tokenizing contours") {
  const double T = 146.83;
  const QuantizerConfig cfg;
  const Vocabulary vocab(cfg);

  const auto high = tokenize_contour(constant_contour(2 * T, 100), T, cfg, vocab);
  CHECK(high.size() == 100);
  for (int id : high.ids) CHECK(id == vocab.id_of(60));

  PitchContour silent = constant_contour(kUnvoiced, 50);
  CHECK(tokenize_contour(silent, T, cfg, vocab).empty());

  const auto low = tokenize_contour(constant_contour(T / 8, 3), T, cfg, vocab);
  CHECK(low.ids == std::vector<int>(3, Vocabulary::kOov));

  QuantizerConfig other;
  other.k = 4;
  CHECK_THROWS_AS(tokenize_contour(silent, T, other, vocab), Error);
}

TEST_CASE("rest tokens keep unvoiced frames in place") {
  const double T = 200.0;
  QuantizerConfig cfg;
  cfg.rest_token = true;
  const Vocabulary vocab(cfg);
  PitchContour c;
  c.frames = {{0.0, T, 1.0}, {0.01, kUnvoiced, 0.0}, {0.02, 2 * T, 1.0}};
  const auto seq = tokenize_contour(c, T, cfg, vocab);
  CHECK(seq.ids == std::vector<int>{vocab.id_of(0), Vocabulary::kOov, vocab.id_of(60)});
}

TEST_CASE("values to ids") {
  const Vocabulary vocab;
  const std::vector<int> values{0, 60, -200};
  CHECK(values_to_ids(values, vocab) == std::vector<int>{122, 182, Vocabulary::kOov});
}
