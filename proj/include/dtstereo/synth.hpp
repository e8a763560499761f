#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dtstereo/imageio.hpp"

namespace dtstereo {

// Two-layer scene: a (possibly slanted) background plane with disparity
// bg_offset + bg_slope_x * x + bg_slope_y * y in left-image coordinates, and
// an optional fronto-parallel foreground rectangle [fg_x0, fg_x1) x [fg_y0, fg_y1)
// at integer disparity fg_disparity. Both surfaces carry random-dot textures.
struct SceneSpec {
  int height = 48;
  int width = 64;
  double bg_offset = 4.0;
  double bg_slope_x = 0.0;
  double bg_slope_y = 0.0;
  bool has_foreground = false;
  int fg_x0 = 0;
  int fg_x1 = 0;
  int fg_y0 = 0;
  int fg_y1 = 0;
  int fg_disparity = 0;
  double right_noise = 0.0;  // stddev of Gaussian noise added to the right view
};

struct SynthScene {
  Image left;
  Image right;
  DisparityMap left_gt;   // dense
  DisparityMap right_gt;  // dense
  std::vector<std::uint8_t> occluded;  // left pixels with no visible match in the right view
};

SynthScene render_scene(const SceneSpec& spec, std::uint64_t seed);

// Uniform integer shift everywhere.
SynthScene make_random_dot_stereogram(int height, int width, int shift, double right_noise, std::uint64_t seed);

enum class SynthKind { RandomDots, Planes };

SynthKind parse_synth_kind(const std::string& name);

// Randomised scene of the given kind whose disparities stay within [1, d_max].
// RandomDots: piecewise-constant shifts (background plus a foreground block).
// Planes: slanted background plane plus a foreground plane, with an occlusion band.
SynthScene make_synthetic(SynthKind kind, int height, int width, int d_max, std::uint64_t seed,
                          double right_noise = 0.02);

}  // namespace dtstereo
