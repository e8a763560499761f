#pragma once

#include <string>
#include <vector>

#include "dtstereo/matcher.hpp"
#include "dtstereo/trainer.hpp"

namespace dtstereo {

struct EvalReport {
  double bad_pixel_rate = 0.0;  // fraction of valid GT pixels that are bad
  double mean_abs_error = 0.0;
  std::size_t valid_count = 0;
  std::size_t bad_count = 0;
};

// KITTI 2015 D1 rule: a pixel is bad when its error exceeds both 3 px and
// 5% of the true disparity. Only valid GT pixels count; a prediction that is
// itself invalid there counts as bad.
EvalReport bad_pixel_rate(const DisparityMap& pred, const DisparityMap& gt);

// Mean D1 rate of match() over the samples.
double mean_bad_pixel_rate(const std::vector<TrainSample>& samples, const PredictorParams& params,
                           const PipelineConfig& cfg);

struct TimingRow {
  std::string stage;
  int calls = 0;
  double milliseconds = 0.0;
};

// Rows: data term, CNN, domain transform, WTA, left-right check, total.
struct TimingReport {
  std::vector<TimingRow> rows;
  int threads = 1;
  int repeats = 1;
  int height = 0;
  int width = 0;
  int labels = 0;

  const TimingRow& row(const std::string& stage) const;
};

// Median per-stage wall-clock over `repeats` runs of match(); one warm-up
// run is discarded.
TimingReport benchmark(const StereoPair& pair, const PredictorParams& params, const PipelineConfig& cfg,
                       int repeats);

std::string format_timing_table(const TimingReport& report);
std::string format_timing_csv(const TimingReport& report);

}  // namespace dtstereo
