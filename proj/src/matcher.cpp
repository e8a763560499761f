#include "dtstereo/matcher.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>


namespace dtstereo {

void PipelineConfig::validate() const {
  cost.validate();
  dt.validate();
  require(lr_tolerance >= 0.0, "PipelineConfig: lr tolerance must be >= 0");
  require(loss_scale > 0.0 && std::isfinite(loss_scale), "PipelineConfig: loss scale must be > 0");
  require(threads >= 1, "PipelineConfig: threads must be >= 1");
}

template <typename T>
DisparityMap wta(const Volume<T>& vol) {
  require(vol.depth >= 1, "wta: volume has no labels");
  DisparityMap out(vol.height, vol.width);
  for (int y = 0; y < vol.height; ++y) {
    for (int x = 0; x < vol.width; ++x) {
      const auto costs = vol.pixel(y, x);
      int best = 0;
      for (int d = 1; d < vol.depth; ++d)
        if (costs[d] < costs[best]) best = d;
      out.set(y, x, static_cast<float>(best));
    }
  }
  return out;
}

template DisparityMap wta<float>(const Volume<float>&);
template DisparityMap wta<double>(const Volume<double>&);

LossReport softmax_xent_loss(const Volume<double>& vol, const DisparityMap& gt, double scale) {
  require(gt.height == vol.height && gt.width == vol.width, "softmax_xent_loss: ground truth shape mismatch");
  require(scale > 0.0, "softmax_xent_loss: scale must be > 0");
  LossReport report;
  report.gradient = Volume<double>(vol.height, vol.width, vol.depth);

  std::vector<int> labels(static_cast<std::size_t>(vol.height) * vol.width, -1);
  for (int y = 0; y < vol.height; ++y) {
    for (int x = 0; x < vol.width; ++x) {
      if (!gt.is_valid(y, x)) continue;
      const long label = std::lround(gt(y, x));
      if (label < 0 || label > vol.d_max()) continue;
      labels[gt.index(y, x)] = static_cast<int>(label);
      ++report.valid_count;
    }
  }
  require(report.valid_count > 0, "softmax_xent_loss: no valid ground-truth pixel");

  const double inv_n = 1.0 / static_cast<double>(report.valid_count);
  std::vector<double> p(vol.depth);
  double total = 0.0;
  for (int y = 0; y < vol.height; ++y) {
    for (int x = 0; x < vol.width; ++x) {
      const int label = labels[gt.index(y, x)];
      if (label < 0) continue;
      const auto costs = vol.pixel(y, x);
      double top = -std::numeric_limits<double>::infinity();
      for (double c : costs) top = std::max(top, -scale * c);
      double z = 0.0;
      for (int d = 0; d < vol.depth; ++d) {
        p[d] = std::exp(-scale * costs[d] - top);
        z += p[d];
      }
      total += -(-scale * costs[label] - top - std::log(z));
      auto grad = report.gradient.pixel(y, x);
      for (int d = 0; d < vol.depth; ++d) {
        const double prob = p[d] / z;
        grad[d] = -scale * (prob - (d == label ? 1.0 : 0.0)) * inv_n;
      }
    }
  }
  report.loss = total * inv_n;
  return report;
}

CheckedDisparity lr_check(const DisparityMap& left, const DisparityMap& right, double tol) {
  require(left.height == right.height && left.width == right.width, "lr_check: dimension mismatch");
  require(tol >= 0.0, "lr_check: tolerance must be >= 0");
  const int h = left.height;
  const int w = left.width;

  float right_max = 0.0f;
  for (std::size_t i = 0; i < right.values.size(); ++i)
    if (right.valid[i]) right_max = std::max(right_max, right.values[i]);
  const int scan_limit = static_cast<int>(std::ceil(right_max + tol));

  auto agrees = [&](int y, int x, double d) {
    const long xr = std::lround(x - d);
    if (xr < 0 || xr >= w || !right.is_valid(y, static_cast<int>(xr))) return false;
    return std::abs(d - right(y, static_cast<int>(xr))) <= tol;
  };

  CheckedDisparity out{DisparityMap(h, w), std::vector<PixelCheck>(static_cast<std::size_t>(h) * w)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = left.index(y, x);
      if (left.is_valid(y, x) && agrees(y, x, left(y, x))) {
        out.labels[i] = PixelCheck::Consistent;
        out.disparity.set(y, x, left(y, x));
        continue;
      }
      bool could_match = false;
      for (int d = 0; d <= std::min(x, scan_limit) && !could_match; ++d) could_match = agrees(y, x, d);
      out.labels[i] = could_match ? PixelCheck::Mismatch : PixelCheck::Occluded;
    }
  }
  return out;
}

namespace {

// Nearest consistent value along the row, left first.
bool row_fill(const DisparityMap& src, int y, int x, float& value) {
  for (int xx = x - 1; xx >= 0; --xx)
    if (src.is_valid(y, xx)) {
      value = src(y, xx);
      return true;
    }
  for (int xx = x + 1; xx < src.width; ++xx)
    if (src.is_valid(y, xx)) {
      value = src(y, xx);
      return true;
    }
  return false;
}

bool median_fill(const DisparityMap& src, int y, int x, float& value) {
  static constexpr std::array<std::array<int, 2>, 8> kDirections = {
      {{-1, 0}, {1, 0}, {0, -1}, {0, 1}, {-1, -1}, {1, -1}, {-1, 1}, {1, 1}}};
  std::array<float, 8> found{};
  int n = 0;
  for (const auto& [dx, dy] : kDirections) {
    for (int xx = x + dx, yy = y + dy; xx >= 0 && xx < src.width && yy >= 0 && yy < src.height;
         xx += dx, yy += dy) {
      if (src.is_valid(yy, xx)) {
        found[n++] = src(yy, xx);
        break;
      }
    }
  }
  if (n == 0) return false;
  std::sort(found.begin(), found.begin() + n);
  value = found[(n - 1) / 2];
  return true;
}

// Last resort for rows without any consistent pixel: nearest row that has one.
bool nearest_row_fill(const DisparityMap& src, int y, int x, float& value) {
  for (int k = 1; k < src.height; ++k) {
    for (int yy : {y - k, y + k}) {
      if (yy < 0 || yy >= src.height) continue;
      if (src.is_valid(yy, x)) {
        value = src(yy, x);
        return true;
      }
      if (row_fill(src, yy, x, value)) return true;
    }
  }
  return false;
}

}  // namespace

DisparityMap fill_invalid(const CheckedDisparity& checked) {
  const DisparityMap& src = checked.disparity;
  require(checked.labels.size() == static_cast<std::size_t>(src.height) * src.width,
          "fill_invalid: label count does not match the map");
  require(src.valid_count() > 0, "fill_invalid: no consistent pixel to interpolate from");
  DisparityMap out = src;
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      const PixelCheck label = checked.labels[src.index(y, x)];
      if (label == PixelCheck::Consistent && src.is_valid(y, x)) continue;
      float value = 0.0f;
      bool ok = label == PixelCheck::Mismatch ? median_fill(src, y, x, value) : row_fill(src, y, x, value);
      if (!ok) ok = row_fill(src, y, x, value) || nearest_row_fill(src, y, x, value);
      require(ok, "fill_invalid: no consistent pixel reachable");
      out.set(y, x, value);
    }
  }
  return out;
}

WeightMaps<float> predict_weights(const Image& img, const PredictorParams& params, const DtParams& dt) {
  const PredictorOutput pred = predictor_forward(img, params);
  const WeightMaps<double> maps = energy_to_weights(pred.e_hor, pred.e_vert, dt.sigma);
  return {plane_cast<float>(maps.horizontal), plane_cast<float>(maps.vertical)};
}

DisparityMap match(const StereoPair& pair, const PredictorParams& params, const PipelineConfig& cfg,
                   StageTimings* timings) {
  cfg.validate();

  CostVolume left_vol;
  {
    ScopedStage stage(timings, Stage::DataTerm);
    left_vol = build_cost_volume(pair, cfg.cost, cfg.threads);
  }

  WeightMaps<float> left_maps;
  WeightMaps<float> right_maps;
  if (cfg.enable_aggregation) {
    // Both views are one batched predictor call.
    ScopedStage stage(timings, Stage::Predictor);
    left_maps = predict_weights(pair.left, params, cfg.dt);
    if (cfg.enable_lr_check) right_maps = predict_weights(pair.right, params, cfg.dt);
  }

  auto select = [&](CostVolume vol, const WeightMaps<float>& maps) {
    if (cfg.enable_aggregation) {
      ScopedStage stage(timings, Stage::DomainTransform);
      vol = filter_cost_volume(vol, maps, cfg.threads);
    }
    ScopedStage stage(timings, Stage::Wta);
    return wta(vol);
  };

  DisparityMap left_disp = select(std::move(left_vol), left_maps);
  if (!cfg.enable_lr_check) return left_disp;

  CostVolume right_vol;
  {
    ScopedStage stage(timings, Stage::DataTerm);
    right_vol = build_cost_volume_right(pair, cfg.cost, cfg.threads);
  }
  const DisparityMap right_disp = select(std::move(right_vol), right_maps);

  ScopedStage stage(timings, Stage::LeftRightCheck);
  const CheckedDisparity checked = lr_check(left_disp, right_disp, cfg.lr_tolerance);
  if (checked.disparity.valid_count() == 0) return left_disp;
  return fill_invalid(checked);
}

}  // namespace dtstereo
