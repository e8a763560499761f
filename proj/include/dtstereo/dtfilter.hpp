#pragma once

#include <array>
#include <span>
#include <vector>

#include "dtstereo/imageio.hpp"
#include "dtstereo/tensor.hpp"

namespace dtstereo {

// Per-pixel gates in [0,1]: `horizontal` drives the row passes, `vertical`
// the column passes.
template <typename T>
struct WeightMaps {
  Plane<T> horizontal;
  Plane<T> vertical;

  int height() const { return horizontal.height; }
  int width() const { return horizontal.width; }
};

struct DtParams {
  double sigma = 4.0;  // w = exp(-sigma * e)

  void validate() const;
};

enum class Pass { LeftToRight, RightToLeft, TopToBottom, BottomToTop };

inline constexpr std::array<Pass, 4> kPassOrder = {Pass::LeftToRight, Pass::RightToLeft, Pass::TopToBottom,
                                                   Pass::BottomToTop};

inline bool is_horizontal(Pass p) { return p == Pass::LeftToRight || p == Pass::RightToLeft; }

// y[0] = x[0]; y[i] = (1 - w[i]) x[i] + w[i] y[i-1]. w[0] is not read.
template <typename T>
std::vector<T> dt_1d(std::span<const T> x, std::span<const T> w);

// One directional pass over an (h, w, depth) buffer laid out like Volume:
// every label channel is filtered with the same per-pixel gate.
template <typename T>
void dt_pass(std::span<const T> in, std::span<T> out, int height, int width, int depth, const Plane<T>& gates,
             Pass pass, int threads = 1);

// Cascade LR -> RL -> TB -> BT, each pass consuming the previous output.
template <typename T>
Plane<T> dt_2d(const Plane<T>& img, const WeightMaps<T>& maps);

template <typename T>
WeightMaps<T> energy_to_weights(const Plane<T>& e_hor, const Plane<T>& e_vert, double sigma);

// Every slice E_d is filtered by dt_2d with the same maps.
template <typename T>
Volume<T> filter_cost_volume(const Volume<T>& vol, const WeightMaps<T>& maps, int threads = 1);

// Uniform gate value everywhere; handy for fixed-weight aggregation.
template <typename T>
WeightMaps<T> uniform_weights(int height, int width, T value);

// 8-bit style grayscale export: pixel = w (saved scaled by 255).
Image weight_map_image(const Plane<float>& weights);

}  // namespace dtstereo
