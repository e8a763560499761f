#include "dtstereo/costvol.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "dtstereo/parallel.hpp"

namespace dtstereo {

void CostParams::validate() const {
  require(alpha > 0.0 && alpha < 1.0, "CostParams: alpha must lie in (0,1)");
  require(census_patch >= 3 && census_patch % 2 == 1, "CostParams: census patch must be odd and >= 3");
  require(d_max >= 1, "CostParams: d_max must be >= 1");
}

BitString::BitString(int bits) : bits_(bits), words_((bits + 63) / 64, 0) {
  require(bits >= 0, "BitString: negative length");
}

void BitString::set(int k, bool value) {
  const std::uint64_t mask = std::uint64_t{1} << (k % 64);
  if (value)
    words_[k / 64] |= mask;
  else
    words_[k / 64] &= ~mask;
}

BitString BitString::operator~() const {
  BitString out(bits_);
  for (std::size_t i = 0; i < words_.size(); ++i) out.words_[i] = ~words_[i];
  if (bits_ % 64 != 0) out.words_.back() &= (std::uint64_t{1} << (bits_ % 64)) - 1;
  return out;
}

int hamming(BitView a, BitView b) {
  require(a.bits == b.bits && a.words.size() == b.words.size(), "hamming: bit lengths differ");
  int count = 0;
  for (std::size_t i = 0; i < a.words.size(); ++i) count += std::popcount(a.words[i] ^ b.words[i]);
  return count;
}

CensusImage::CensusImage(int height, int width, int patch)
    : height_(height),
      width_(width),
      patch_(patch),
      words_per_pixel_((patch * patch - 1 + 63) / 64),
      words_(static_cast<std::size_t>(height) * width * words_per_pixel_, 0) {}

BitView CensusImage::descriptor(int y, int x) const {
  const std::size_t offset = (static_cast<std::size_t>(y) * width_ + x) * words_per_pixel_;
  return {std::span<const std::uint64_t>(words_.data() + offset, words_per_pixel_), bits()};
}

void CensusImage::set_bit(int y, int x, int k) {
  const std::size_t offset = (static_cast<std::size_t>(y) * width_ + x) * words_per_pixel_;
  words_[offset + k / 64] |= std::uint64_t{1} << (k % 64);
}

CensusImage census_transform(const Image& gray, int patch) {
  require(gray.channels == 1, "census_transform: expected a single-channel image");
  require(patch >= 3 && patch % 2 == 1, "census_transform: patch side must be odd and >= 3");
  const int r = patch / 2;
  CensusImage out(gray.height, gray.width, patch);
  for (int y = 0; y < gray.height; ++y) {
    for (int x = 0; x < gray.width; ++x) {
      const float centre = gray(y, x);
      int k = 0;
      for (int dy = -r; dy <= r; ++dy) {
        const int yy = std::clamp(y + dy, 0, gray.height - 1);
        for (int dx = -r; dx <= r; ++dx) {
          if (dy == 0 && dx == 0) continue;
          const int xx = std::clamp(x + dx, 0, gray.width - 1);
          if (gray(yy, xx) < centre) out.set_bit(y, x, k);
          ++k;
        }
      }
    }
  }
  return out;
}

StereoPair make_stereo_pair(Image left, Image right) {
  require(left.height == right.height && left.width == right.width, "stereo pair: image dimensions differ");
  auto to_rgb = [](Image img) {
    if (img.channels == 3) return img;
    Image rgb(img.height, img.width, 3);
    for (std::size_t i = 0; i < img.data.size(); ++i)
      for (int c = 0; c < 3; ++c) rgb.data[3 * i + c] = img.data[i];
    return rgb;
  };
  StereoPair pair;
  pair.left = to_rgb(std::move(left));
  pair.right = to_rgb(std::move(right));
  pair.left_gray = to_grayscale(pair.left);
  pair.right_gray = to_grayscale(pair.right);
  return pair;
}

namespace {

inline float pixel_sad(const Image& a, int ax, const Image& b, int bx, int y) {
  const float s = std::abs(a(y, ax, 0) - b(y, bx, 0)) + std::abs(a(y, ax, 1) - b(y, bx, 1)) +
                  std::abs(a(y, ax, 2) - b(y, bx, 2));
  return s / 3.0f;
}

// Shared builder. `step` is -1 for the left reference (candidate x - d) and
// +1 for the right reference (candidate x + d).
CostVolume build_volume(const Image& ref, const Image& other, const CensusImage& ref_census,
                        const CensusImage& other_census, const CostParams& params, int step, int threads) {
  const int h = ref.height;
  const int w = ref.width;
  const int labels = params.d_max + 1;
  const double alpha = params.alpha;
  const double census_norm = 1.0 / ref_census.bits();
  CostVolume vol(h, w, labels);
  parallel_for(h, threads, [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < w; ++x) {
        const BitView ref_desc = ref_census.descriptor(y, x);
        float* out = vol.pixel(y, x).data();
        for (int d = 0; d < labels; ++d) {
          const int xo = x + step * d;
          if (xo < 0 || xo >= w) {
            out[d] = 1.0f;
            continue;
          }
          const double sad = pixel_sad(ref, x, other, xo, y);
          const double census = hamming(ref_desc, other_census.descriptor(y, xo)) * census_norm;
          out[d] = static_cast<float>(alpha * sad + (1.0 - alpha) * census);
        }
      }
    }
  });
  return vol;
}

void check_pair(const StereoPair& pair) {
  require(pair.left.channels == 3 && pair.right.channels == 3, "cost volume: colour images required");
  require(pair.left.height == pair.right.height && pair.left.width == pair.right.width,
          "cost volume: image dimensions differ");
  require(pair.left_gray.height == pair.left.height && pair.left_gray.width == pair.left.width &&
              pair.right_gray.height == pair.left.height && pair.right_gray.width == pair.left.width,
          "cost volume: grayscale planes do not match the colour images");
}

}  // namespace

float sad_cost(const Image& left, const Image& right, int x, int y, int d) {
  require(left.channels == 3 && right.channels == 3, "sad_cost: colour images required");
  require(y >= 0 && y < left.height && x >= 0 && x < left.width && d >= 0, "sad_cost: index out of range");
  if (x - d < 0) return 1.0f;
  return pixel_sad(left, x, right, x - d, y);
}

CostVolume build_cost_volume(const StereoPair& pair, const CostParams& params, int threads) {
  params.validate();
  check_pair(pair);
  const CensusImage cl = census_transform(pair.left_gray, params.census_patch);
  const CensusImage cr = census_transform(pair.right_gray, params.census_patch);
  return build_volume(pair.left, pair.right, cl, cr, params, -1, threads);
}

CostVolume build_cost_volume_right(const StereoPair& pair, const CostParams& params, int threads) {
  params.validate();
  check_pair(pair);
  const CensusImage cl = census_transform(pair.left_gray, params.census_patch);
  const CensusImage cr = census_transform(pair.right_gray, params.census_patch);
  return build_volume(pair.right, pair.left, cr, cl, params, +1, threads);
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw FormatError("cost volume dump: truncated file");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_cost_volume(const CostVolume& vol, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  put_u32(out, static_cast<std::uint32_t>(vol.height));
  put_u32(out, static_cast<std::uint32_t>(vol.width));
  put_u32(out, static_cast<std::uint32_t>(vol.depth));
  for (float v : vol.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

CostVolume load_cost_volume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  const auto h = get_u32(in);
  const auto w = get_u32(in);
  const auto d = get_u32(in);
  if (h > (1u << 16) || w > (1u << 16) || d > (1u << 16)) throw FormatError("cost volume dump: implausible shape");
  CostVolume vol(static_cast<int>(h), static_cast<int>(w), static_cast<int>(d));
  for (float& v : vol.data) v = std::bit_cast<float>(get_u32(in));
  return vol;
}

}  // namespace dtstereo
