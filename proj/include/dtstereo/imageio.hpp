#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dtstereo/error.hpp"

namespace dtstereo {

// Real-valued image in [0,1]. Row-major, channels interleaved:
// data[(y * width + x) * channels + c].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, int c, float fill = 0.0f)
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {
    require(h >= 0 && w >= 0, "Image: negative dimension");
    require(c == 1 || c == 3, "Image: channels must be 1 or 3");
  }

  float& operator()(int y, int x, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float operator()(int y, int x, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

// Per-pixel disparity with a validity mask. Invalid pixels hold
// kInvalidDisparity and must be skipped by every loss and metric.
struct DisparityMap {
  static constexpr float kInvalidDisparity = 0.0f;

  int height = 0;
  int width = 0;
  std::vector<float> values;
  std::vector<std::uint8_t> valid;

  DisparityMap() = default;
  DisparityMap(int h, int w)
      : height(h),
        width(w),
        values(static_cast<std::size_t>(h) * w, kInvalidDisparity),
        valid(static_cast<std::size_t>(h) * w, 0) {}

  std::size_t index(int y, int x) const { return static_cast<std::size_t>(y) * width + x; }
  float operator()(int y, int x) const { return values[index(y, x)]; }
  bool is_valid(int y, int x) const { return valid[index(y, x)] != 0; }

  void set(int y, int x, float d) {
    values[index(y, x)] = d;
    valid[index(y, x)] = 1;
  }
  void invalidate(int y, int x) {
    values[index(y, x)] = kInvalidDisparity;
    valid[index(y, x)] = 0;
  }

  std::size_t valid_count() const;
};

// PNG (8/16 bit, gray/RGB; palette and alpha are converted), binary PGM (P5)
// and PPM (P6) with maxval up to 65535.
Image load_image(const std::filesystem::path& path);

// Format chosen from the extension: .png, .pgm (1 channel) or .ppm (3 channels).
void save_image(const Image& img, const std::filesystem::path& path, int bit_depth = 8);

// BT.601 luma: 0.299 R + 0.587 G + 0.114 B.
Image to_grayscale(const Image& img);

// KITTI disparity PNG: 16-bit single channel, 0 = invalid, otherwise v / 256.
DisparityMap load_disparity_kitti(const std::filesystem::path& path);
void save_disparity(const DisparityMap& map, const std::filesystem::path& path);

}  // namespace dtstereo
