#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <set>

#include "ragaseq/sampling.hpp"

using namespace ragaseq;

namespace {

TokenSequence ramp(std::size_t n) {
  TokenSequence s;
  s.ids.resize(n);
  std::iota(s.ids.begin(), s.ids.end(), 2);
  s.source_id = "rec";
  s.raga = 1;
  return s;
}

}  // namespace

TEST_CASE("samples per recording") {
  CHECK(compute_num_samples(500000, 5000) == 220);
  CHECK(compute_num_samples(5000, 5000) == 3);
  CHECK(compute_num_samples(1000, 4000) == 1);
  CHECK(compute_num_samples(4000, 2000) == 5);
  CHECK_THROWS_AS(compute_num_samples(0, 10), Error);
}

TEST_CASE("random subsequences stay in bounds") {
  const auto seq = ramp(10000);
  Rng rng(1);
  const auto subs = sample_subsequences(seq, 5000, 220, rng);
  CHECK(subs.size() == 220);
  for (const auto& s : subs) {
    CHECK(s.size() == 5000);
    CHECK(s.offset <= 5000);
    CHECK(s.ids.front() == seq.ids[s.offset]);
    CHECK(s.raga == 1);
    CHECK(s.source_id == "rec");
  }
}

TEST_CASE("sampling is seeded") {
  const auto seq = ramp(20000);
  Rng a(9), b(9), c(10);
  auto starts = [&](Rng& rng) {
    std::multiset<std::size_t> out;
    for (const auto& s : sample_subsequences(seq, 500, 30, rng)) out.insert(s.offset);
    return out;
  };
  const auto sa = starts(a);
  CHECK(sa == starts(b));
  CHECK(sa != starts(c));
}

TEST_CASE("short recordings are left-padded") {
  Rng rng(0);
  const auto subs = sample_subsequences(ramp(3000), 5000, 2, rng);
  for (const auto& s : subs) {
    CHECK(s.size() == 5000);
    CHECK(std::all_of(s.ids.begin(), s.ids.begin() + 2000, [](int id) { return id == Vocabulary::kPad; }));
    CHECK(s.ids[2000] == 2);
  }
  CHECK_THROWS_AS(sample_subsequences(ramp(10), 5, 0, rng), Error);
}

TEST_CASE("inference windows") {
  auto w = split_for_inference(ramp(12000), 5000);
  CHECK(w.size() == 2);
  CHECK(w[1].offset == 5000);

  w = split_for_inference(ramp(12600), 5000);
  REQUIRE(w.size() == 3);
  CHECK(w[2].offset == 10000);
  CHECK(w[2].ids[2399] == Vocabulary::kPad);
  CHECK(w[2].ids[2400] == 10002);

  const auto one = ramp(5000);
  w = split_for_inference(one, 5000);
  REQUIRE(w.size() == 1);
  CHECK(w[0].ids == one.ids);

  // Odd window: a remainder of exactly half rounds toward keeping it.
  CHECK(split_for_inference(ramp(7 + 4), 7).size() == 2);
  CHECK(split_for_inference(ramp(7 + 3), 7).size() == 1);

  // A recording shorter than half a window still gets one padded window.
  w = split_for_inference(ramp(100), 5000);
  REQUIRE(w.size() == 1);
  CHECK(w[0].size() == 5000);
}

TEST_CASE("left_pad") {
  CHECK(left_pad({3, 4}, 4) == std::vector<int>{0, 0, 3, 4});
  CHECK(left_pad({1, 2, 3}, 2) == std::vector<int>{2, 3});
}
