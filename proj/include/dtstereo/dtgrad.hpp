#pragma once

#include <array>
#include <span>
#include <vector>

#include "dtstereo/dtfilter.hpp"

namespace dtstereo {

// Forward record of one 1-D recurrence.
template <typename T>
struct DtTape1d {
  std::vector<T> x;
  std::vector<T> w;
  std::vector<T> y;
};

template <typename T>
DtTape1d<T> record_dt_1d(std::span<const T> x, std::span<const T> w);

template <typename T>
struct DtGradients1d {
  std::vector<T> d_x;
  std::vector<T> d_w;
};

template <typename T>
DtGradients1d<T> dt_1d_backward(const DtTape1d<T>& tape, std::span<const T> d_y);

// Forward record of the four-pass cascade over an (h, w, depth) buffer.
// stages[0] is the input, stages[k] the output of the k-th pass in
// kPassOrder; stages[4] is the filtered result.
template <typename T>
struct DtTape {
  int height = 0;
  int width = 0;
  int depth = 0;
  WeightMaps<T> maps;
  std::array<std::vector<T>, 5> stages;

  const std::vector<T>& output() const { return stages[4]; }
};

template <typename T>
DtTape<T> record_dt_2d(const Plane<T>& img, const WeightMaps<T>& maps);

template <typename T>
DtTape<T> record_filter_cost_volume(const Volume<T>& vol, const WeightMaps<T>& maps, int threads = 1);

template <typename T>
Plane<T> tape_output_plane(const DtTape<T>& tape);
template <typename T>
Volume<T> tape_output_volume(const DtTape<T>& tape);

// Backward of a single directional pass. Writes d_in, accumulates into d_gates.
// `d_out` is consumed as the running accumulator and left modified.
template <typename T>
void dt_pass_backward(std::span<const T> in, std::span<const T> out, std::span<T> d_out, std::span<T> d_in,
                      int height, int width, int depth, const Plane<T>& gates, Plane<T>& d_gates, Pass pass,
                      int threads = 1);

template <typename T>
struct DtGradients2d {
  Plane<T> d_input;
  Plane<T> d_horizontal;
  Plane<T> d_vertical;
};

template <typename T>
DtGradients2d<T> dt_2d_backward(const DtTape<T>& tape, const Plane<T>& d_out);

template <typename T>
struct DtVolumeGradients {
  Volume<T> d_input;
  Plane<T> d_horizontal;  // summed over all slices
  Plane<T> d_vertical;
};

template <typename T>
DtVolumeGradients<T> filter_volume_backward(const DtTape<T>& tape, const Volume<T>& d_out, int threads = 1);

// dL/de = -sigma exp(-sigma e) dL/dw, zero where the forward clamp bound (e < 0).
template <typename T>
Plane<T> energy_to_weights_backward(const Plane<T>& e, double sigma, const Plane<T>& d_w);

}  // namespace dtstereo
