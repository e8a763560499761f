#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dtstereo/error.hpp"

namespace dtstereo {

// Dense row-major 2-D array.
template <typename T>
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Plane() = default;
  Plane(int h, int w, T fill = T{}) : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {
    require(h >= 0 && w >= 0, "Plane: negative dimension");
  }

  T& operator()(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& operator()(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }

  std::size_t size() const { return data.size(); }

  template <typename U>
  bool same_shape(const Plane<U>& other) const {
    return height == other.height && width == other.width;
  }
};

// Dense 3-D array indexed (y, x, d) with d contiguous. For a cost volume,
// depth = d_max + 1 labels.
template <typename T>
struct Volume {
  int height = 0;
  int width = 0;
  int depth = 0;
  std::vector<T> data;

  Volume() = default;
  Volume(int h, int w, int d, T fill = T{})
      : height(h), width(w), depth(d), data(static_cast<std::size_t>(h) * w * d, fill) {
    require(h >= 0 && w >= 0 && d >= 0, "Volume: negative dimension");
  }

  std::size_t index(int y, int x, int d) const {
    return (static_cast<std::size_t>(y) * width + x) * depth + d;
  }
  T& operator()(int y, int x, int d) { return data[index(y, x, d)]; }
  const T& operator()(int y, int x, int d) const { return data[index(y, x, d)]; }

  std::span<T> pixel(int y, int x) { return {data.data() + index(y, x, 0), static_cast<std::size_t>(depth)}; }
  std::span<const T> pixel(int y, int x) const {
    return {data.data() + index(y, x, 0), static_cast<std::size_t>(depth)};
  }

  int d_max() const { return depth - 1; }
  std::size_t size() const { return data.size(); }

  template <typename U>
  bool same_shape(const Volume<U>& other) const {
    return height == other.height && width == other.width && depth == other.depth;
  }

  // Copy of slice d as a plane.
  Plane<T> slice(int d) const {
    Plane<T> out(height, width);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) out(y, x) = (*this)(y, x, d);
    return out;
  }
};

template <typename To, typename From>
Volume<To> volume_cast(const Volume<From>& v) {
  Volume<To> out(v.height, v.width, v.depth);
  for (std::size_t i = 0; i < v.data.size(); ++i) out.data[i] = static_cast<To>(v.data[i]);
  return out;
}

template <typename To, typename From>
Plane<To> plane_cast(const Plane<From>& p) {
  Plane<To> out(p.height, p.width);
  for (std::size_t i = 0; i < p.data.size(); ++i) out.data[i] = static_cast<To>(p.data[i]);
  return out;
}

using CostVolume = Volume<float>;

}  // namespace dtstereo
