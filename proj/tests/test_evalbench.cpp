#include <doctest.h>

#include <random>
#include <sstream>

#include "dtstereo/error.hpp"
#include "dtstereo/evalbench.hpp"
#include "dtstereo/synth.hpp"

using namespace dtstereo;

TEST_CASE("bad-pixel rate") {
  DisparityMap gt(1, 3), pred(1, 3);
  gt.set(0, 0, 100);
  gt.set(0, 1, 100);
  gt.set(0, 2, 10);
  CHECK(bad_pixel_rate(gt, gt).bad_pixel_rate == 0.0);

  pred.set(0, 0, 102);
  pred.set(0, 1, 96);
  pred.set(0, 2, 14);
  const EvalReport r = bad_pixel_rate(pred, gt);
  CHECK(r.bad_pixel_rate == doctest::Approx(1.0 / 3));
  CHECK(r.bad_count == 1);
  CHECK(r.valid_count == 3);
  CHECK(r.mean_abs_error == doctest::Approx(10.0 / 3));

  DisparityMap shifted(1, 3);
  for (int x = 0; x < 3; ++x) shifted.set(0, x, gt(0, x) + 10);
  CHECK(bad_pixel_rate(shifted, gt).bad_pixel_rate == 1.0);

  // Invalid GT is skipped, invalid prediction counts as bad.
  gt.invalidate(0, 0);
  pred.invalidate(0, 1);
  const EvalReport masked = bad_pixel_rate(pred, gt);
  CHECK(masked.valid_count == 2);
  CHECK(masked.bad_count == 2);

  CHECK_THROWS_AS(bad_pixel_rate(pred, DisparityMap(1, 3)), ContractError);
  CHECK_THROWS_AS(bad_pixel_rate(DisparityMap(2, 3), gt), ContractError);
}

TEST_CASE("rate is invariant to pixel permutation") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(1, 60), err(-8, 8);
  DisparityMap gt(1, 40), pred(1, 40);
  for (int x = 0; x < 40; ++x) {
    gt.set(0, x, u(rng));
    pred.set(0, x, gt(0, x) + err(rng));
  }
  DisparityMap gt2(1, 40), pred2(1, 40);
  for (int x = 0; x < 40; ++x) {
    gt2.set(0, x, gt(0, 39 - x));
    pred2.set(0, x, pred(0, 39 - x));
  }
  CHECK(bad_pixel_rate(pred, gt).bad_pixel_rate == bad_pixel_rate(pred2, gt2).bad_pixel_rate);
}

TEST_CASE("benchmark report structure") {
  const SynthScene s = make_random_dot_stereogram(24, 32, 3, 0.0, 1);
  const StereoPair pair = make_stereo_pair(s.left, s.right);
  PipelineConfig cfg;
  cfg.cost.d_max = 8;
  const TimingReport r = benchmark(pair, init_params(0), cfg, 1);
  const char* names[] = {"data term", "CNN", "domain transform", "WTA", "left-right check", "total"};
  REQUIRE(r.rows.size() == 6);
  double largest = 0.0;
  for (int i = 0; i < 6; ++i) {
    CHECK(r.rows[i].stage == names[i]);
    CHECK(r.rows[i].milliseconds >= 0.0);
    if (i < 5) largest = std::max(largest, r.rows[i].milliseconds);
  }
  CHECK(r.row("total").milliseconds >= largest);
  CHECK(r.row("domain transform").calls == 2);
  CHECK(r.labels == 9);
  CHECK_THROWS(r.row("nope"));

  cfg.enable_aggregation = false;
  const TimingReport off = benchmark(pair, init_params(0), cfg, 2);
  CHECK(off.row("domain transform").calls == 0);
  CHECK(off.row("CNN").calls == 0);

  const std::string table = format_timing_table(r);
  for (const char* n : names) CHECK(table.find(n) != std::string::npos);
  std::istringstream csv(format_timing_csv(r));
  std::string line;
  int rows = 0;
  std::getline(csv, line);
  CHECK(line == "stage,calls,milliseconds");
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 6);
  CHECK_THROWS_AS(benchmark(pair, init_params(0), cfg, 0), ContractError);
}
