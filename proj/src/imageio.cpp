#include "dtstereo/imageio.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>
#include <string>

namespace dtstereo {

std::size_t DisparityMap::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

namespace {

// Integer samples straight from the file, before scaling to [0,1].
struct RawImage {
  int height = 0;
  int width = 0;
  int channels = 0;
  int bit_depth = 8;
  bool source_gray = true;  // the file itself stored a single gray channel
  int maxval = 255;
  std::vector<std::uint16_t> samples;
};

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  return f;
}

[[noreturn]] void png_error_handler(png_structp png, png_const_charp message) {
  auto* out = static_cast<std::string*>(png_get_error_ptr(png));
  if (out) *out = message;
  std::longjmp(png_jmpbuf(png), 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

RawImage read_png(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  auto message = std::make_unique<std::string>();
  auto raw = std::make_unique<RawImage>();
  auto rows = std::make_unique<std::vector<png_bytep>>();
  auto buffer = std::make_unique<std::vector<png_byte>>();

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, message.get(), png_error_handler, png_warning_handler);
  if (!png) throw IoError("libpng: cannot create read struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng: cannot create info struct");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("PNG decode failed for '" + path.string() + "': " + *message);
  }

  png_init_io(png, file.get());
  png_read_info(png, info);
  const int color_type = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  raw->source_gray = (color_type == PNG_COLOR_TYPE_GRAY);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if ((color_type & PNG_COLOR_MASK_COLOR) == 0 && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  raw->width = static_cast<int>(png_get_image_width(png, info));
  raw->height = static_cast<int>(png_get_image_height(png, info));
  raw->channels = png_get_channels(png, info);
  raw->bit_depth = png_get_bit_depth(png, info);
  raw->maxval = raw->bit_depth == 16 ? 65535 : 255;
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  buffer->resize(row_bytes * raw->height);
  rows->resize(raw->height);
  for (int y = 0; y < raw->height; ++y) (*rows)[y] = buffer->data() + row_bytes * y;
  png_read_image(png, rows->data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (raw->channels == 2) raw->channels = 1;  // gray + alpha that survived stripping
  const std::size_t count = static_cast<std::size_t>(raw->width) * raw->height * raw->channels;
  raw->samples.resize(count);
  if (raw->bit_depth == 16) {
    for (std::size_t i = 0; i < count; ++i)
      raw->samples[i] = static_cast<std::uint16_t>(((*buffer)[2 * i] << 8) | (*buffer)[2 * i + 1]);
  } else {
    for (std::size_t i = 0; i < count; ++i) raw->samples[i] = (*buffer)[i];
  }
  return std::move(*raw);
}

void write_png(const RawImage& raw, const std::filesystem::path& path) {
  FilePtr file = open_file(path, "wb");
  auto message = std::make_unique<std::string>();
  auto buffer = std::make_unique<std::vector<png_byte>>();
  auto rows = std::make_unique<std::vector<png_bytep>>();

  const int bytes = raw.bit_depth == 16 ? 2 : 1;
  const std::size_t row_bytes = static_cast<std::size_t>(raw.width) * raw.channels * bytes;
  buffer->resize(row_bytes * raw.height);
  for (std::size_t i = 0; i < raw.samples.size(); ++i) {
    if (bytes == 2) {
      (*buffer)[2 * i] = static_cast<png_byte>(raw.samples[i] >> 8);
      (*buffer)[2 * i + 1] = static_cast<png_byte>(raw.samples[i] & 0xff);
    } else {
      (*buffer)[i] = static_cast<png_byte>(raw.samples[i]);
    }
  }
  rows->resize(raw.height);
  for (int y = 0; y < raw.height; ++y) (*rows)[y] = buffer->data() + row_bytes * y;

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, message.get(), png_error_handler, png_warning_handler);
  if (!png) throw IoError("libpng: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng: cannot create info struct");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encode failed for '" + path.string() + "': " + *message);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, raw.width, raw.height, raw.bit_depth,
               raw.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows->data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Binary PNM header token, skipping whitespace and '#' comments.
int read_pnm_int(std::istream& in) {
  int c = in.get();
  while (in && (std::isspace(c) || c == '#')) {
    if (c == '#')
      while (in && c != '\n') c = in.get();
    c = in.get();
  }
  if (!in || !std::isdigit(c)) throw FormatError("malformed PNM header");
  long value = 0;
  while (in && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    if (value > 1 << 24) throw FormatError("PNM header value out of range");
    c = in.get();
  }
  // exactly one whitespace byte terminates the token; it has been consumed
  return static_cast<int>(value);
}

RawImage read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  char magic[2];
  in.read(magic, 2);
  RawImage raw;
  raw.channels = magic[1] == '6' ? 3 : 1;
  raw.source_gray = raw.channels == 1;
  raw.width = read_pnm_int(in);
  raw.height = read_pnm_int(in);
  const int maxval = read_pnm_int(in);
  if (raw.width <= 0 || raw.height <= 0 || maxval <= 0 || maxval > 65535)
    throw FormatError("PNM header out of range in '" + path.string() + "'");
  raw.bit_depth = maxval > 255 ? 16 : 8;
  const std::size_t count = static_cast<std::size_t>(raw.width) * raw.height * raw.channels;
  const int bytes = raw.bit_depth == 16 ? 2 : 1;
  std::vector<unsigned char> buffer(count * bytes);
  in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()));
  if (in.gcount() != static_cast<std::streamsize>(buffer.size()))
    throw FormatError("truncated PNM data in '" + path.string() + "'");
  raw.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    raw.samples[i] = bytes == 2 ? static_cast<std::uint16_t>((buffer[2 * i] << 8) | buffer[2 * i + 1]) : buffer[i];
  for (auto& s : raw.samples) s = std::min<std::uint16_t>(s, static_cast<std::uint16_t>(maxval));
  raw.maxval = maxval;
  return raw;
}

void write_pnm(const RawImage& raw, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  const int maxval = raw.bit_depth == 16 ? 65535 : 255;
  out << (raw.channels == 3 ? "P6" : "P5") << '\n' << raw.width << ' ' << raw.height << '\n' << maxval << '\n';
  for (std::uint16_t s : raw.samples) {
    if (raw.bit_depth == 16) out.put(static_cast<char>(s >> 8));
    out.put(static_cast<char>(s & 0xff));
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

enum class FileKind { Png, Pnm };

FileKind sniff(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::array<unsigned char, 8> head{};
  in.read(reinterpret_cast<char*>(head.data()), head.size());
  const auto n = in.gcount();
  if (n >= 8 && png_sig_cmp(head.data(), 0, 8) == 0) return FileKind::Png;
  if (n >= 2 && head[0] == 'P' && (head[1] == '5' || head[1] == '6')) return FileKind::Pnm;
  throw FormatError("unsupported image format: '" + path.string() + "'");
}

RawImage read_raw(const std::filesystem::path& path) {
  return sniff(path) == FileKind::Png ? read_png(path) : read_pnm(path);
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  const RawImage raw = read_raw(path);
  Image img(raw.height, raw.width, raw.channels);
  const float maxval = static_cast<float>(raw.maxval);
  for (std::size_t i = 0; i < raw.samples.size(); ++i) img.data[i] = static_cast<float>(raw.samples[i]) / maxval;
  return img;
}

void save_image(const Image& img, const std::filesystem::path& path, int bit_depth) {
  require(bit_depth == 8 || bit_depth == 16, "save_image: bit depth must be 8 or 16");
  require(img.data.size() == static_cast<std::size_t>(img.width) * img.height * img.channels,
          "save_image: malformed image");
  RawImage raw;
  raw.height = img.height;
  raw.width = img.width;
  raw.channels = img.channels;
  raw.bit_depth = bit_depth;
  const double maxval = bit_depth == 16 ? 65535.0 : 255.0;
  raw.samples.resize(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const double v = std::isfinite(img.data[i]) ? std::clamp<double>(img.data[i], 0.0, 1.0) : 0.0;
    raw.samples[i] = static_cast<std::uint16_t>(std::lround(v * maxval));
  }
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    write_png(raw, path);
  } else if (ext == ".pgm" || ext == ".ppm") {
    require((ext == ".pgm") == (img.channels == 1), "save_image: .pgm needs 1 channel, .ppm needs 3");
    write_pnm(raw, path);
  } else {
    throw FormatError("save_image: unsupported extension '" + ext + "'");
  }
}

Image to_grayscale(const Image& img) {
  require(img.channels == 3, "to_grayscale: expected a 3-channel image");
  Image gray(img.height, img.width, 1);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double v = 0.299 * img(y, x, 0) + 0.587 * img(y, x, 1) + 0.114 * img(y, x, 2);
      gray(y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return gray;
}

DisparityMap load_disparity_kitti(const std::filesystem::path& path) {
  if (sniff(path) != FileKind::Png) throw FormatError("disparity map must be a PNG: '" + path.string() + "'");
  const RawImage raw = read_png(path);
  if (raw.bit_depth != 16 || !raw.source_gray || raw.channels != 1)
    throw FormatError("disparity PNG must be 16-bit single channel: '" + path.string() + "'");
  DisparityMap map(raw.height, raw.width);
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) {
      const std::uint16_t v = raw.samples[static_cast<std::size_t>(y) * raw.width + x];
      if (v > 0) map.set(y, x, static_cast<float>(v) / 256.0f);
    }
  }
  return map;
}

void save_disparity(const DisparityMap& map, const std::filesystem::path& path) {
  const std::size_t n = static_cast<std::size_t>(map.width) * map.height;
  require(map.values.size() == n && map.valid.size() == n, "save_disparity: malformed map");
  RawImage raw;
  raw.height = map.height;
  raw.width = map.width;
  raw.channels = 1;
  raw.bit_depth = 16;
  raw.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!map.valid[i]) continue;
    // Valid pixels never encode to 0, which is reserved for "invalid".
    const double scaled = std::round(static_cast<double>(map.values[i]) * 256.0);
    raw.samples[i] = static_cast<std::uint16_t>(std::clamp(scaled, 1.0, 65535.0));
  }
  write_png(raw, path);
}

}  // namespace dtstereo
