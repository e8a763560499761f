#include "dtstereo/dtgrad.hpp"

#include <algorithm>
#include <cmath>

#include "dtstereo/parallel.hpp"

namespace dtstereo {

template <typename T>
DtTape1d<T> record_dt_1d(std::span<const T> x, std::span<const T> w) {
  DtTape1d<T> tape;
  tape.y = dt_1d<T>(x, w);
  tape.x.assign(x.begin(), x.end());
  tape.w.assign(w.begin(), w.end());
  return tape;
}

template <typename T>
DtGradients1d<T> dt_1d_backward(const DtTape1d<T>& tape, std::span<const T> d_y) {
  const std::size_t n = tape.x.size();
  require(n > 0 && tape.w.size() == n && tape.y.size() == n, "dt_1d_backward: malformed tape");
  require(d_y.size() == n, "dt_1d_backward: seed length does not match tape");
  DtGradients1d<T> grads{std::vector<T>(n, T(0)), std::vector<T>(n, T(0))};
  std::vector<T> g(d_y.begin(), d_y.end());
  for (std::size_t i = n - 1; i >= 1; --i) {
    grads.d_x[i] += (T(1) - tape.w[i]) * g[i];
    grads.d_w[i] += (tape.y[i - 1] - tape.x[i]) * g[i];
    g[i - 1] += tape.w[i] * g[i];
  }
  grads.d_x[0] += g[0];
  return grads;
}

namespace {

template <typename T>
void check_maps(const WeightMaps<T>& maps, int height, int width) {
  require(maps.horizontal.height == height && maps.horizontal.width == width && maps.vertical.height == height &&
              maps.vertical.width == width,
          "domain transform: weight maps do not match the input dimensions");
}

template <typename T>
DtTape<T> record(std::vector<T> input, int height, int width, int depth, const WeightMaps<T>& maps,
                 int threads) {
  check_maps(maps, height, width);
  DtTape<T> tape;
  tape.height = height;
  tape.width = width;
  tape.depth = depth;
  tape.maps = maps;
  tape.stages[0] = std::move(input);
  for (std::size_t k = 0; k < kPassOrder.size(); ++k) {
    const Pass p = kPassOrder[k];
    tape.stages[k + 1].resize(tape.stages[0].size());
    if (tape.stages[0].empty()) continue;
    dt_pass<T>(tape.stages[k], tape.stages[k + 1], height, width, depth,
               is_horizontal(p) ? maps.horizontal : maps.vertical, p, threads);
  }
  return tape;
}

template <typename T>
void check_tape(const DtTape<T>& tape) {
  const std::size_t n = static_cast<std::size_t>(tape.height) * tape.width * tape.depth;
  for (const auto& s : tape.stages) require(s.size() == n, "domain transform backward: malformed tape");
  check_maps(tape.maps, tape.height, tape.width);
}

// Runs the four pass backwards in reverse order; returns d_input.
template <typename T>
std::vector<T> cascade_backward(const DtTape<T>& tape, std::vector<T> g, Plane<T>& d_hor, Plane<T>& d_vert,
                                int threads) {
  std::vector<T> d_in(g.size());
  for (int k = static_cast<int>(kPassOrder.size()) - 1; k >= 0; --k) {
    const Pass p = kPassOrder[k];
    const bool horizontal = is_horizontal(p);
    dt_pass_backward<T>(tape.stages[k], tape.stages[k + 1], g, d_in, tape.height, tape.width, tape.depth,
                        horizontal ? tape.maps.horizontal : tape.maps.vertical, horizontal ? d_hor : d_vert, p,
                        threads);
    g.swap(d_in);
  }
  return g;
}

}  // namespace

template <typename T>
DtTape<T> record_dt_2d(const Plane<T>& img, const WeightMaps<T>& maps) {
  return record(img.data, img.height, img.width, 1, maps, 1);
}

template <typename T>
DtTape<T> record_filter_cost_volume(const Volume<T>& vol, const WeightMaps<T>& maps, int threads) {
  return record(vol.data, vol.height, vol.width, vol.depth, maps, threads);
}

template <typename T>
Plane<T> tape_output_plane(const DtTape<T>& tape) {
  require(tape.depth == 1, "tape_output_plane: tape holds a volume");
  Plane<T> out(tape.height, tape.width);
  out.data = tape.output();
  return out;
}

template <typename T>
Volume<T> tape_output_volume(const DtTape<T>& tape) {
  Volume<T> out(tape.height, tape.width, tape.depth);
  out.data = tape.output();
  return out;
}

template <typename T>
void dt_pass_backward(std::span<const T> in, std::span<const T> out, std::span<T> d_out, std::span<T> d_in,
                      int height, int width, int depth, const Plane<T>& gates, Plane<T>& d_gates, Pass pass,
                      int threads) {
  const std::size_t n = static_cast<std::size_t>(height) * width * depth;
  require(in.size() == n && out.size() == n && d_out.size() == n && d_in.size() == n,
          "dt_pass_backward: buffer size does not match shape");
  require(gates.height == height && gates.width == width && d_gates.height == height && d_gates.width == width,
          "dt_pass_backward: gate map does not match shape");
  if (n == 0) return;
  const std::size_t row = static_cast<std::size_t>(width) * depth;

  // Each pixel belongs to exactly one scanline, so d_gates writes are disjoint
  // across workers and the result does not depend on the thread count.
  auto step = [&](std::size_t cur, std::size_t prev, int y, int x) {
    const T g = gates(y, x);
    T acc = T(0);
    for (int d = 0; d < depth; ++d) {
      const T gi = d_out[cur + d];
      d_in[cur + d] = (T(1) - g) * gi;
      acc += (out[prev + d] - in[cur + d]) * gi;
      d_out[prev + d] += g * gi;
    }
    d_gates(y, x) += acc;
  };

  if (is_horizontal(pass)) {
    const bool forward = pass == Pass::LeftToRight;
    parallel_for(height, threads, [&](int y0, int y1) {
      for (int y = y0; y < y1; ++y) {
        for (int k = width - 1; k >= 1; --k) {
          const int x = forward ? k : width - 1 - k;
          const int prev = forward ? x - 1 : x + 1;
          step(y * row + x * depth, y * row + prev * depth, y, x);
        }
        const std::size_t first = y * row + (forward ? 0 : width - 1) * depth;
        std::copy_n(d_out.begin() + first, depth, d_in.begin() + first);
      }
    });
  } else {
    const bool forward = pass == Pass::TopToBottom;
    parallel_for(width, threads, [&](int x0, int x1) {
      for (int k = height - 1; k >= 1; --k) {
        const int y = forward ? k : height - 1 - k;
        const int prev = forward ? y - 1 : y + 1;
        for (int x = x0; x < x1; ++x) step(y * row + x * depth, prev * row + x * depth, y, x);
      }
      const std::size_t first = (forward ? 0 : height - 1) * row;
      std::copy(d_out.begin() + first + x0 * depth, d_out.begin() + first + x1 * depth,
                d_in.begin() + first + x0 * depth);
    });
  }
}

template <typename T>
DtGradients2d<T> dt_2d_backward(const DtTape<T>& tape, const Plane<T>& d_out) {
  check_tape(tape);
  require(tape.depth == 1, "dt_2d_backward: tape holds a volume");
  require(d_out.height == tape.height && d_out.width == tape.width, "dt_2d_backward: seed shape mismatch");
  DtGradients2d<T> grads{Plane<T>(tape.height, tape.width), Plane<T>(tape.height, tape.width),
                         Plane<T>(tape.height, tape.width)};
  grads.d_input.data = cascade_backward(tape, d_out.data, grads.d_horizontal, grads.d_vertical, 1);
  return grads;
}

template <typename T>
DtVolumeGradients<T> filter_volume_backward(const DtTape<T>& tape, const Volume<T>& d_out, int threads) {
  check_tape(tape);
  require(d_out.height == tape.height && d_out.width == tape.width && d_out.depth == tape.depth,
          "filter_volume_backward: seed shape mismatch");
  DtVolumeGradients<T> grads{Volume<T>(tape.height, tape.width, tape.depth), Plane<T>(tape.height, tape.width),
                             Plane<T>(tape.height, tape.width)};
  grads.d_input.data = cascade_backward(tape, d_out.data, grads.d_horizontal, grads.d_vertical, threads);
  return grads;
}

template <typename T>
Plane<T> energy_to_weights_backward(const Plane<T>& e, double sigma, const Plane<T>& d_w) {
  require(e.same_shape(d_w), "energy_to_weights_backward: shape mismatch");
  require(sigma > 0.0, "energy_to_weights_backward: sigma must be > 0");
  Plane<T> d_e(e.height, e.width);
  for (std::size_t i = 0; i < e.data.size(); ++i) {
    if (e.data[i] < T(0)) continue;  // clamped to 1 in the forward pass
    d_e.data[i] = static_cast<T>(-sigma * std::exp(-sigma * static_cast<double>(e.data[i])) * d_w.data[i]);
  }
  return d_e;
}

#define DTSTEREO_INSTANTIATE(T)                                                                                 \
  template DtTape1d<T> record_dt_1d<T>(std::span<const T>, std::span<const T>);                               \
  template DtGradients1d<T> dt_1d_backward<T>(const DtTape1d<T>&, std::span<const T>);                        \
  template DtTape<T> record_dt_2d<T>(const Plane<T>&, const WeightMaps<T>&);                                   \
  template DtTape<T> record_filter_cost_volume<T>(const Volume<T>&, const WeightMaps<T>&, int);                \
  template Plane<T> tape_output_plane<T>(const DtTape<T>&);                                                    \
  template Volume<T> tape_output_volume<T>(const DtTape<T>&);                                                  \
  template void dt_pass_backward<T>(std::span<const T>, std::span<const T>, std::span<T>, std::span<T>, int,   \
                                    int, int, const Plane<T>&, Plane<T>&, Pass, int);                          \
  template DtGradients2d<T> dt_2d_backward<T>(const DtTape<T>&, const Plane<T>&);                              \
  template DtVolumeGradients<T> filter_volume_backward<T>(const DtTape<T>&, const Volume<T>&, int);            \
  template Plane<T> energy_to_weights_backward<T>(const Plane<T>&, double, const Plane<T>&);

DTSTEREO_INSTANTIATE(float)
DTSTEREO_INSTANTIATE(double)
#undef DTSTEREO_INSTANTIATE

}  // namespace dtstereo
