#include "dtstereo/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dtstereo/error.hpp"

namespace dtstereo {

namespace {

// Random-dot texture, linearly interpolated along x.
class Texture {
 public:
  Texture(int height, int width, std::mt19937_64& rng, float tint) : height_(height), width_(width) {
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    texels_.resize(static_cast<std::size_t>(height) * width * 3);
    for (std::size_t i = 0; i < texels_.size(); i += 3) {
      texels_[i] = (1.0f - tint) * u(rng) + tint;
      texels_[i + 1] = u(rng);
      texels_[i + 2] = (1.0f - tint) * u(rng);
    }
  }

  float sample(int y, double u, int c) const {
    const double clamped = std::clamp(u, 0.0, static_cast<double>(width_ - 1));
    const int u0 = static_cast<int>(std::floor(clamped));
    const int u1 = std::min(u0 + 1, width_ - 1);
    const double f = clamped - u0;
    return static_cast<float>((1.0 - f) * at(y, u0, c) + f * at(y, u1, c));
  }

 private:
  float at(int y, int u, int c) const { return texels_[(static_cast<std::size_t>(y) * width_ + u) * 3 + c]; }

  int height_;
  int width_;
  std::vector<float> texels_;
};

}  // namespace

SynthScene render_scene(const SceneSpec& s, std::uint64_t seed) {
  require(s.height >= 1 && s.width >= 1, "render_scene: empty image");
  require(s.bg_slope_x < 1.0, "render_scene: background slope must be < 1");
  std::mt19937_64 rng(seed);
  const int h = s.height;
  const int w = s.width;

  auto bg_disp = [&](double x, int y) { return s.bg_offset + s.bg_slope_x * x + s.bg_slope_y * y; };
  double max_disp = std::max({bg_disp(0, 0), bg_disp(w - 1, 0), bg_disp(0, h - 1), bg_disp(w - 1, h - 1)});
  if (s.has_foreground) max_disp = std::max(max_disp, static_cast<double>(s.fg_disparity));
  require(bg_disp(0, 0) >= 0.0 && bg_disp(w - 1, h - 1) >= 0.0, "render_scene: negative background disparity");

  const int tex_width = w + static_cast<int>(std::ceil(max_disp)) + 2;
  const Texture bg(h, tex_width, rng, 0.0f);
  const Texture fg(h, tex_width, rng, 0.3f);

  auto in_fg_rows = [&](int y) { return s.has_foreground && y >= s.fg_y0 && y < s.fg_y1; };
  auto fg_left = [&](int y, double x) { return in_fg_rows(y) && x >= s.fg_x0 && x < s.fg_x1; };
  // Foreground footprint in right-image coordinates.
  auto fg_right = [&](int y, double xr) { return fg_left(y, xr + s.fg_disparity); };

  SynthScene scene;
  scene.left = Image(h, w, 3);
  scene.right = Image(h, w, 3);
  scene.left_gt = DisparityMap(h, w);
  scene.right_gt = DisparityMap(h, w);
  scene.occluded.assign(static_cast<std::size_t>(h) * w, 0);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (fg_left(y, x)) {
        for (int c = 0; c < 3; ++c) scene.left(y, x, c) = fg.sample(y, x, c);
        scene.left_gt.set(y, x, static_cast<float>(s.fg_disparity));
        if (x - s.fg_disparity < 0) scene.occluded[scene.left_gt.index(y, x)] = 1;
      } else {
        for (int c = 0; c < 3; ++c) scene.left(y, x, c) = bg.sample(y, x, c);
        const double d = bg_disp(x, y);
        scene.left_gt.set(y, x, static_cast<float>(d));
        const double xr = x - d;
        if (xr < 0.0 || fg_right(y, xr)) scene.occluded[scene.left_gt.index(y, x)] = 1;
      }

      // Right view: pixel xr sees the foreground if it covers xr, else the
      // background point whose left coordinate u satisfies u - d(u) = xr.
      const double xr = x;
      if (fg_right(y, xr)) {
        for (int c = 0; c < 3; ++c) scene.right(y, x, c) = fg.sample(y, xr + s.fg_disparity, c);
        scene.right_gt.set(y, x, static_cast<float>(s.fg_disparity));
      } else {
        const double u = (xr + s.bg_offset + s.bg_slope_y * y) / (1.0 - s.bg_slope_x);
        for (int c = 0; c < 3; ++c) scene.right(y, x, c) = bg.sample(y, u, c);
        scene.right_gt.set(y, x, static_cast<float>(bg_disp(u, y)));
      }
    }
  }

  if (s.right_noise > 0.0) {
    std::normal_distribution<float> noise(0.0f, static_cast<float>(s.right_noise));
    for (float& v : scene.right.data) v = std::clamp(v + noise(rng), 0.0f, 1.0f);
  }
  return scene;
}

SynthScene make_random_dot_stereogram(int height, int width, int shift, double right_noise, std::uint64_t seed) {
  require(shift >= 0, "make_random_dot_stereogram: negative shift");
  SceneSpec spec;
  spec.height = height;
  spec.width = width;
  spec.bg_offset = shift;
  spec.right_noise = right_noise;
  return render_scene(spec, seed);
}

SynthKind parse_synth_kind(const std::string& name) {
  if (name == "rds") return SynthKind::RandomDots;
  if (name == "planes") return SynthKind::Planes;
  throw ContractError("unknown synthetic scene kind '" + name + "' (expected rds or planes)");
}

SynthScene make_synthetic(SynthKind kind, int height, int width, int d_max, std::uint64_t seed, double right_noise) {
  require(height >= 8 && width >= 16, "make_synthetic: image too small");
  require(d_max >= 8, "make_synthetic: d_max must be >= 8");
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto uniform_int = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  SceneSpec spec;
  spec.height = height;
  spec.width = width;
  spec.right_noise = right_noise;
  spec.has_foreground = true;

  double bg_max = 0.0;
  if (kind == SynthKind::RandomDots) {
    spec.bg_offset = uniform_int(1, std::max(1, d_max / 4));
    bg_max = spec.bg_offset;
  } else {
    spec.bg_offset = uniform(1.0, d_max / 6.0);
    spec.bg_slope_x = uniform(0.0, 0.05);
    spec.bg_slope_y = uniform(0.0, (d_max / 3.0) / height);
    bg_max = spec.bg_offset + spec.bg_slope_x * (width - 1) + spec.bg_slope_y * (height - 1);
  }
  const int fg_min = static_cast<int>(std::ceil(bg_max)) + 4;
  spec.fg_disparity = uniform_int(std::min(fg_min, d_max), d_max);

  const int fg_w = uniform_int(width / 4, width / 2);
  const int fg_h = uniform_int(height / 3, (2 * height) / 3);
  spec.fg_x0 = uniform_int(width / 4, width - fg_w - 1);
  spec.fg_x1 = spec.fg_x0 + fg_w;
  spec.fg_y0 = uniform_int(1, height - fg_h - 1);
  spec.fg_y1 = spec.fg_y0 + fg_h;
  return render_scene(spec, rng());
}

}  // namespace dtstereo
