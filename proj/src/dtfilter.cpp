#include "dtstereo/dtfilter.hpp"

#include <algorithm>
#include <cmath>

#include "dtstereo/parallel.hpp"

namespace dtstereo {

void DtParams::validate() const { require(sigma > 0.0 && std::isfinite(sigma), "DtParams: sigma must be > 0"); }

template <typename T>
std::vector<T> dt_1d(std::span<const T> x, std::span<const T> w) {
  require(x.size() == w.size(), "dt_1d: signal and weight lengths differ");
  require(!x.empty(), "dt_1d: empty signal");
  std::vector<T> y(x.size());
  y[0] = x[0];
  for (std::size_t i = 1; i < x.size(); ++i) y[i] = (T(1) - w[i]) * x[i] + w[i] * y[i - 1];
  return y;
}

template <typename T>
void dt_pass(std::span<const T> in, std::span<T> out, int height, int width, int depth, const Plane<T>& gates,
             Pass pass, int threads) {
  const std::size_t n = static_cast<std::size_t>(height) * width * depth;
  require(in.size() == n && out.size() == n, "dt_pass: buffer size does not match shape");
  require(gates.height == height && gates.width == width, "dt_pass: gate map does not match shape");
  const std::size_t row = static_cast<std::size_t>(width) * depth;

  if (is_horizontal(pass)) {
    const bool forward = pass == Pass::LeftToRight;
    parallel_for(height, threads, [&](int y0, int y1) {
      for (int y = y0; y < y1; ++y) {
        const T* src = in.data() + y * row;
        T* dst = out.data() + y * row;
        const int first = forward ? 0 : width - 1;
        std::copy_n(src + first * depth, depth, dst + first * depth);
        for (int k = 1; k < width; ++k) {
          const int x = forward ? k : width - 1 - k;
          const int prev = forward ? x - 1 : x + 1;
          const T g = gates(y, x);
          const T* xs = src + x * depth;
          const T* yp = dst + prev * depth;
          T* ys = dst + x * depth;
          for (int d = 0; d < depth; ++d) ys[d] = (T(1) - g) * xs[d] + g * yp[d];
        }
      }
    });
  } else {
    const bool forward = pass == Pass::TopToBottom;
    parallel_for(width, threads, [&](int x0, int x1) {
      const int first = forward ? 0 : height - 1;
      std::copy(in.data() + first * row + x0 * depth, in.data() + first * row + x1 * depth,
                out.data() + first * row + x0 * depth);
      for (int k = 1; k < height; ++k) {
        const int y = forward ? k : height - 1 - k;
        const int prev = forward ? y - 1 : y + 1;
        for (int x = x0; x < x1; ++x) {
          const T g = gates(y, x);
          const T* xs = in.data() + y * row + x * depth;
          const T* yp = out.data() + prev * row + x * depth;
          T* ys = out.data() + y * row + x * depth;
          for (int d = 0; d < depth; ++d) ys[d] = (T(1) - g) * xs[d] + g * yp[d];
        }
      }
    });
  }
}

namespace {

template <typename T>
void check_maps(const WeightMaps<T>& maps, int height, int width) {
  require(maps.horizontal.height == height && maps.horizontal.width == width && maps.vertical.height == height &&
              maps.vertical.width == width,
          "domain transform: weight maps do not match the input dimensions");
}

template <typename T>
void cascade(std::vector<T>& buffer, int height, int width, int depth, const WeightMaps<T>& maps, int threads) {
  std::vector<T> scratch(buffer.size());
  for (Pass p : kPassOrder) {
    dt_pass<T>(buffer, scratch, height, width, depth, is_horizontal(p) ? maps.horizontal : maps.vertical, p,
               threads);
    buffer.swap(scratch);
  }
}

}  // namespace

template <typename T>
Plane<T> dt_2d(const Plane<T>& img, const WeightMaps<T>& maps) {
  check_maps(maps, img.height, img.width);
  Plane<T> out = img;
  if (img.size() == 0) return out;
  cascade(out.data, img.height, img.width, 1, maps, 1);
  return out;
}

template <typename T>
WeightMaps<T> energy_to_weights(const Plane<T>& e_hor, const Plane<T>& e_vert, double sigma) {
  require(sigma > 0.0, "energy_to_weights: sigma must be > 0");
  require(e_hor.same_shape(e_vert), "energy_to_weights: energy maps differ in shape");
  auto map = [sigma](const Plane<T>& e) {
    Plane<T> w(e.height, e.width);
    for (std::size_t i = 0; i < e.data.size(); ++i) {
      require(std::isfinite(e.data[i]), "energy_to_weights: non-finite energy");
      w.data[i] = std::clamp(static_cast<T>(std::exp(-sigma * static_cast<double>(e.data[i]))), T(0), T(1));
    }
    return w;
  };
  return {map(e_hor), map(e_vert)};
}

template <typename T>
Volume<T> filter_cost_volume(const Volume<T>& vol, const WeightMaps<T>& maps, int threads) {
  check_maps(maps, vol.height, vol.width);
  Volume<T> out = vol;
  if (vol.size() == 0) return out;
  cascade(out.data, vol.height, vol.width, vol.depth, maps, threads);
  return out;
}

template <typename T>
WeightMaps<T> uniform_weights(int height, int width, T value) {
  require(value >= T(0) && value <= T(1), "uniform_weights: gate must lie in [0,1]");
  return {Plane<T>(height, width, value), Plane<T>(height, width, value)};
}

Image weight_map_image(const Plane<float>& weights) {
  Image img(weights.height, weights.width, 1);
  for (std::size_t i = 0; i < weights.data.size(); ++i) img.data[i] = std::clamp(weights.data[i], 0.0f, 1.0f);
  return img;
}

#define DTSTEREO_INSTANTIATE(T)                                                                                \
  template std::vector<T> dt_1d<T>(std::span<const T>, std::span<const T>);                                  \
  template void dt_pass<T>(std::span<const T>, std::span<T>, int, int, int, const Plane<T>&, Pass, int);      \
  template Plane<T> dt_2d<T>(const Plane<T>&, const WeightMaps<T>&);                                          \
  template WeightMaps<T> energy_to_weights<T>(const Plane<T>&, const Plane<T>&, double);                      \
  template Volume<T> filter_cost_volume<T>(const Volume<T>&, const WeightMaps<T>&, int);                      \
  template WeightMaps<T> uniform_weights<T>(int, int, T);

DTSTEREO_INSTANTIATE(float)
DTSTEREO_INSTANTIATE(double)
#undef DTSTEREO_INSTANTIATE

}  // namespace dtstereo
