#pragma once

#include <cstdint>
#include <vector>

#include "dtstereo/costvol.hpp"
#include "dtstereo/dtfilter.hpp"
#include "dtstereo/predictor.hpp"
#include "dtstereo/timing.hpp"

namespace dtstereo {

struct PipelineConfig {
  CostParams cost;
  DtParams dt;
  bool enable_lr_check = true;
  bool enable_aggregation = true;
  double lr_tolerance = 1.0;  // pixels
  // Inverse temperature of the training softmax: p = softmax(-loss_scale * cost).
  double loss_scale = 1.0;
  int threads = 1;

  void validate() const;
};

// Per-pixel argmin over d; ties go to the smaller label. All pixels valid.
template <typename T>
DisparityMap wta(const Volume<T>& vol);

struct LossReport {
  double loss = 0.0;  // mean over valid pixels
  std::size_t valid_count = 0;
  Volume<double> gradient;  // dL/dcost, zero at invalid pixels
};

// One-hot cross-entropy over p = softmax(-scale * cost). Ground truth is rounded
// to the nearest label; labels outside [0, d_max] are ignored.
LossReport softmax_xent_loss(const Volume<double>& vol, const DisparityMap& gt, double scale = 1.0);

enum class PixelCheck : std::uint8_t { Consistent, Occluded, Mismatch };

struct CheckedDisparity {
  DisparityMap disparity;  // consistent pixels only
  std::vector<PixelCheck> labels;
};

// Left-right cross check. Left pixel x with disparity d is consistent if
// |d - right(x - d)| <= tol; otherwise it is a mismatch when some d' has
// |d' - right(x - d')| <= tol, and occluded when none does.
CheckedDisparity lr_check(const DisparityMap& left, const DisparityMap& right, double tol = 1.0);

// Occluded pixels take the nearest consistent value to the left (then to the
// right); mismatched pixels the lower median of the nearest consistent values
// along the 8 compass directions.
DisparityMap fill_invalid(const CheckedDisparity& checked);

// Weight maps predicted for one view.
WeightMaps<float> predict_weights(const Image& img, const PredictorParams& params, const DtParams& dt);

DisparityMap match(const StereoPair& pair, const PredictorParams& params, const PipelineConfig& cfg,
                   StageTimings* timings = nullptr);

}  // namespace dtstereo
