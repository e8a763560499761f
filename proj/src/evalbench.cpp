#include "dtstereo/evalbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace dtstereo {

EvalReport bad_pixel_rate(const DisparityMap& pred, const DisparityMap& gt) {
  require(pred.height == gt.height && pred.width == gt.width, "bad_pixel_rate: dimension mismatch");
  EvalReport report;
  double abs_sum = 0.0;
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    if (!gt.valid[i]) continue;
    ++report.valid_count;
    if (!pred.valid[i]) {
      ++report.bad_count;
      abs_sum += gt.values[i];
      continue;
    }
    const double err = std::abs(static_cast<double>(pred.values[i]) - gt.values[i]);
    abs_sum += err;
    if (err > 3.0 && err > 0.05 * std::abs(static_cast<double>(gt.values[i]))) ++report.bad_count;
  }
  require(report.valid_count > 0, "bad_pixel_rate: ground truth has no valid pixel");
  report.bad_pixel_rate = static_cast<double>(report.bad_count) / static_cast<double>(report.valid_count);
  report.mean_abs_error = abs_sum / static_cast<double>(report.valid_count);
  return report;
}

double mean_bad_pixel_rate(const std::vector<TrainSample>& samples, const PredictorParams& params,
                           const PipelineConfig& cfg) {
  require(!samples.empty(), "mean_bad_pixel_rate: no samples");
  double sum = 0.0;
  for (const auto& s : samples) sum += bad_pixel_rate(match(s.pair, params, cfg), s.gt).bad_pixel_rate;
  return sum / static_cast<double>(samples.size());
}

const TimingRow& TimingReport::row(const std::string& stage) const {
  const auto it = std::find_if(rows.begin(), rows.end(), [&](const TimingRow& r) { return r.stage == stage; });
  require(it != rows.end(), "TimingReport: no stage named '" + stage + "'");
  return *it;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TimingReport benchmark(const StereoPair& pair, const PredictorParams& params, const PipelineConfig& cfg,
                       int repeats) {
  require(repeats >= 1, "benchmark: repeats must be >= 1");
  match(pair, params, cfg);  // warm-up

  std::vector<StageTimings> runs(repeats);
  std::vector<double> totals(repeats);
  for (int r = 0; r < repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    match(pair, params, cfg, &runs[r]);
    totals[r] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }

  TimingReport report;
  report.threads = cfg.threads;
  report.repeats = repeats;
  report.height = pair.height();
  report.width = pair.width();
  report.labels = cfg.cost.d_max + 1;
  for (int s = 0; s < kStageCount; ++s) {
    std::vector<double> ms(repeats);
    for (int r = 0; r < repeats; ++r) ms[r] = runs[r].milliseconds[s];
    report.rows.push_back({std::string(kStageNames[s]), runs.back().calls[s], median(ms)});
  }
  report.rows.push_back({"total", 0, median(totals)});
  return report;
}

std::string format_timing_table(const TimingReport& report) {
  std::ostringstream out;
  out << "image " << report.width << "x" << report.height << ", " << report.labels << " labels, " << report.threads
      << " thread(s), median of " << report.repeats << " run(s)\n";
  out << std::left << std::setw(18) << "stage" << std::setw(12) << "# of calls"
      << "total runtime, msec\n";
  out << std::fixed << std::setprecision(3);
  for (const auto& row : report.rows) {
    out << std::left << std::setw(18) << row.stage << std::setw(12)
        << (row.stage == "total" ? std::string() : std::to_string(row.calls)) << row.milliseconds << '\n';
  }
  return out.str();
}

std::string format_timing_csv(const TimingReport& report) {
  std::ostringstream out;
  out << "stage,calls,milliseconds\n" << std::fixed << std::setprecision(4);
  for (const auto& row : report.rows)
    out << row.stage << ',' << (row.stage == "total" ? std::string() : std::to_string(row.calls)) << ','
        << row.milliseconds << '\n';
  return out.str();
}

}  // namespace dtstereo
