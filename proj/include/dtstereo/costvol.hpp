#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dtstereo/imageio.hpp"
#include "dtstereo/tensor.hpp"

namespace dtstereo {

struct CostParams {
  double alpha = 0.43;   // weight of the SAD term; census gets 1 - alpha
  int census_patch = 7;  // odd side of the census window
  int d_max = 128;       // labels are 0..d_max

  void validate() const;
  int census_bits() const { return census_patch * census_patch - 1; }
};

// Read-only view of a packed bit string (bit k lives in word k / 64, bit k % 64).
struct BitView {
  std::span<const std::uint64_t> words;
  int bits = 0;
};

class BitString {
 public:
  explicit BitString(int bits);

  int size() const { return bits_; }
  bool test(int k) const { return (words_[k / 64] >> (k % 64)) & 1u; }
  void set(int k, bool value = true);
  BitString operator~() const;
  BitView view() const { return {words_, bits_}; }

 private:
  int bits_;
  std::vector<std::uint64_t> words_;
};

int hamming(BitView a, BitView b);
inline int hamming(const BitString& a, const BitString& b) { return hamming(a.view(), b.view()); }

// Per-pixel census descriptors. Bit k is set iff the k-th neighbour of the
// window (row-major, centre skipped) is strictly darker than the centre.
// Neighbours outside the image replicate the nearest edge pixel.
class CensusImage {
 public:
  CensusImage(int height, int width, int patch);

  int height() const { return height_; }
  int width() const { return width_; }
  int patch() const { return patch_; }
  int bits() const { return patch_ * patch_ - 1; }

  BitView descriptor(int y, int x) const;
  void set_bit(int y, int x, int k);

 private:
  int height_;
  int width_;
  int patch_;
  int words_per_pixel_;
  std::vector<std::uint64_t> words_;
};

CensusImage census_transform(const Image& gray, int patch);

// Rectified colour pair plus the grayscale planes used by the census term.
struct StereoPair {
  Image left;
  Image right;
  Image left_gray;
  Image right_gray;

  int height() const { return left.height; }
  int width() const { return left.width; }
};

// Single-channel inputs are expanded to three identical channels.
StereoPair make_stereo_pair(Image left, Image right);

// Normalised SAD between left (x, y) and right (x - d, y); 1.0 when x - d < 0.
float sad_cost(const Image& left, const Image& right, int x, int y, int d);

// E(x,y,d) = alpha * SAD/3 + (1 - alpha) * hamming/(n^2 - 1), left reference,
// right pixel x - d. Out-of-range candidates cost 1.
CostVolume build_cost_volume(const StereoPair& pair, const CostParams& params, int threads = 1);

// Right reference: right pixel x against left pixel x + d.
CostVolume build_cost_volume_right(const StereoPair& pair, const CostParams& params, int threads = 1);

// Debug dump: int32 LE h, w, d_max + 1 followed by float32 LE in (y, x, d) order.
void save_cost_volume(const CostVolume& vol, const std::filesystem::path& path);
CostVolume load_cost_volume(const std::filesystem::path& path);

}  // namespace dtstereo
