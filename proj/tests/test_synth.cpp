#include <doctest.h>

#include "dtstereo/error.hpp"
#include "dtstereo/synth.hpp"

using namespace dtstereo;

TEST_CASE("random-dot stereogram is a pure shift") {
  const SynthScene s = make_random_dot_stereogram(10, 20, 3, 0.0, 2);
  for (int y = 0; y < 10; ++y)
    for (int x = 3; x < 20; ++x)
      for (int c = 0; c < 3; ++c) CHECK(s.left(y, x, c) == doctest::Approx(s.right(y, x - 3, c)).epsilon(1e-6));
  for (int y = 0; y < 10; ++y) {
    CHECK(s.occluded[s.left_gt.index(y, 2)] != 0);
    CHECK(s.occluded[s.left_gt.index(y, 3)] == 0);
  }
  CHECK(s.left_gt.valid_count() == 200);
}

TEST_CASE("synthetic scenes respect the disparity range") {
  for (auto kind : {SynthKind::RandomDots, SynthKind::Planes}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const SynthScene s = make_synthetic(kind, 32, 48, 16, seed);
      for (float d : s.left_gt.values) CHECK((d >= 1.0f && d <= 16.0f));
      for (float v : s.right.data) CHECK((v >= 0.0f && v <= 1.0f));
      std::size_t occluded = 0;
      for (auto o : s.occluded) occluded += o;
      CHECK(occluded > 0);
    }
  }
  const SynthScene a = make_synthetic(SynthKind::Planes, 32, 48, 16, 5);
  const SynthScene b = make_synthetic(SynthKind::Planes, 32, 48, 16, 5);
  CHECK(a.left.data == b.left.data);
  CHECK(a.right.data == b.right.data);
  CHECK(parse_synth_kind("rds") == SynthKind::RandomDots);
  CHECK(parse_synth_kind("planes") == SynthKind::Planes);
  CHECK_THROWS_AS(parse_synth_kind("cubes"), ContractError);
  CHECK_THROWS_AS(make_synthetic(SynthKind::Planes, 4, 48, 16, 0), ContractError);
}
