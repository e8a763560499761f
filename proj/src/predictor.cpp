#include "dtstereo/predictor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace dtstereo {

PredictorParams PredictorParams::default_architecture() {
  PredictorParams p;
  p.layers.emplace_back(3, 16, 3, 1, true);
  p.layers.emplace_back(16, 16, 3, 2, true);
  p.layers.emplace_back(16, 16, 3, 1, true);
  p.layers.emplace_back(16, 8, 3, 1, true);
  p.layers.emplace_back(8, 2, 1, 1, false);
  return p;
}

std::size_t PredictorParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

std::vector<std::span<double>> PredictorParams::tensors() {
  std::vector<std::span<double>> out;
  for (auto& l : layers) {
    out.emplace_back(l.weights);
    out.emplace_back(l.bias);
  }
  return out;
}

std::vector<std::span<const double>> PredictorParams::tensors() const {
  std::vector<std::span<const double>> out;
  for (const auto& l : layers) {
    out.emplace_back(l.weights);
    out.emplace_back(l.bias);
  }
  return out;
}

void PredictorParams::validate() const {
  require(!layers.empty(), "predictor: no layers");
  require(layers.front().in_channels == 3, "predictor: first layer must take 3 input channels");
  require(layers.back().out_channels == 2, "predictor: last layer must emit exactly 2 channels");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    require(l.kernel >= 1 && l.kernel % 2 == 1 && l.stride >= 1, "predictor: bad kernel or stride");
    require(l.in_channels >= 1 && l.out_channels >= 1, "predictor: bad channel count");
    if (k > 0) require(l.in_channels == layers[k - 1].out_channels, "predictor: channel counts do not chain");
    require(l.weights.size() == static_cast<std::size_t>(l.out_channels) * l.in_channels * l.kernel * l.kernel &&
                l.bias.size() == static_cast<std::size_t>(l.out_channels),
            "predictor: parameter tensor size mismatch");
    for (double v : l.weights) require(std::isfinite(v), "predictor: non-finite parameter");
    for (double v : l.bias) require(std::isfinite(v), "predictor: non-finite parameter");
  }
}

bool PredictorParams::same_shape(const PredictorParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& a = layers[k];
    const auto& b = other.layers[k];
    if (a.in_channels != b.in_channels || a.out_channels != b.out_channels || a.kernel != b.kernel ||
        a.stride != b.stride || a.relu != b.relu || a.weights.size() != b.weights.size() ||
        a.bias.size() != b.bias.size())
      return false;
  }
  return true;
}

PredictorParams init_params(std::uint64_t seed) {
  PredictorParams p = PredictorParams::default_architecture();
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k + 1 < p.layers.size(); ++k) {
    auto& l = p.layers[k];
    const double fan_in = static_cast<double>(l.in_channels) * l.kernel * l.kernel;
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
    for (double& w : l.weights) w = normal(rng);
  }
  return p;
}

PredictorParams uniform_predictor(double gate, double sigma) {
  require(gate > 0.0 && gate <= 1.0, "uniform_predictor: gate must lie in (0,1]");
  require(sigma > 0.0, "uniform_predictor: sigma must be > 0");
  PredictorParams p = PredictorParams::default_architecture();
  const double energy = -std::log(gate) / sigma;
  std::fill(p.layers.back().bias.begin(), p.layers.back().bias.end(), energy);
  return p;
}

namespace {

// Output columns ox whose tap ix = ox * stride + k - pad lands inside [0, n).
struct TapRange {
  int begin;
  int end;
};

TapRange valid_outputs(int k, int pad, int stride, int n_in, int n_out) {
  const int offset = k - pad;
  int begin = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  int end = n_in - 1 - offset < 0 ? 0 : (n_in - 1 - offset) / stride + 1;
  return {std::min(begin, n_out), std::clamp(end, 0, n_out)};
}

}  // namespace

FeatureMap conv_forward(const ConvLayer& layer, const FeatureMap& in) {
  require(in.channels == layer.in_channels, "conv_forward: channel mismatch");
  const int ho = layer.output_size(in.height);
  const int wo = layer.output_size(in.width);
  const int s = layer.stride;
  const int pad = layer.padding();
  FeatureMap out(layer.out_channels, ho, wo);
  for (int o = 0; o < layer.out_channels; ++o) {
    std::fill_n(&out(o, 0, 0), static_cast<std::size_t>(ho) * wo, layer.bias[o]);
    for (int i = 0; i < layer.in_channels; ++i) {
      for (int ky = 0; ky < layer.kernel; ++ky) {
        const TapRange rows = valid_outputs(ky, pad, s, in.height, ho);
        for (int kx = 0; kx < layer.kernel; ++kx) {
          const TapRange cols = valid_outputs(kx, pad, s, in.width, wo);
          const double w = layer.weight(o, i, ky, kx);
          for (int oy = rows.begin; oy < rows.end; ++oy) {
            const double* src = &in(i, oy * s + ky - pad, 0);
            double* dst = &out(o, oy, 0);
            for (int ox = cols.begin; ox < cols.end; ++ox) dst[ox] += w * src[ox * s + kx - pad];
          }
        }
      }
    }
  }
  return out;
}

namespace {

// Accumulates parameter gradients and, if d_in is non-null, the input gradient.
void conv_backward(const ConvLayer& layer, const FeatureMap& in, const FeatureMap& d_out, ConvLayer& grad,
                   FeatureMap* d_in) {
  const int s = layer.stride;
  const int pad = layer.padding();
  const int ho = d_out.height;
  const int wo = d_out.width;
  for (int o = 0; o < layer.out_channels; ++o) {
    double db = 0.0;
    const double* g = &d_out(o, 0, 0);
    for (std::size_t j = 0; j < static_cast<std::size_t>(ho) * wo; ++j) db += g[j];
    grad.bias[o] += db;
    for (int i = 0; i < layer.in_channels; ++i) {
      for (int ky = 0; ky < layer.kernel; ++ky) {
        const TapRange rows = valid_outputs(ky, pad, s, in.height, ho);
        for (int kx = 0; kx < layer.kernel; ++kx) {
          const TapRange cols = valid_outputs(kx, pad, s, in.width, wo);
          const double w = layer.weight(o, i, ky, kx);
          double dw = 0.0;
          for (int oy = rows.begin; oy < rows.end; ++oy) {
            const int iy = oy * s + ky - pad;
            const double* src = &in(i, iy, 0);
            const double* go = &d_out(o, oy, 0);
            for (int ox = cols.begin; ox < cols.end; ++ox) dw += go[ox] * src[ox * s + kx - pad];
            if (d_in) {
              double* gi = &(*d_in)(i, iy, 0);
              for (int ox = cols.begin; ox < cols.end; ++ox) gi[ox * s + kx - pad] += w * go[ox];
            }
          }
          grad.weight(o, i, ky, kx) += dw;
        }
      }
    }
  }
}

struct Interp {
  int i0;
  int i1;
  double f;
};

Interp source_coord(int dst, int n_dst, int n_src) {
  if (n_dst <= 1 || n_src <= 1) return {0, 0, 0.0};
  const double pos = static_cast<double>(dst) * (n_src - 1) / (n_dst - 1);
  const int i0 = std::min(static_cast<int>(std::floor(pos)), n_src - 1);
  const int i1 = std::min(i0 + 1, n_src - 1);
  return {i0, i1, pos - i0};
}

}  // namespace

Plane<double> bilinear_upsample(const Plane<double>& src, int height, int width) {
  require(src.height >= 1 && src.width >= 1 && height >= 1 && width >= 1, "bilinear_upsample: empty shape");
  Plane<double> out(height, width);
  for (int y = 0; y < height; ++y) {
    const Interp iy = source_coord(y, height, src.height);
    for (int x = 0; x < width; ++x) {
      const Interp ix = source_coord(x, width, src.width);
      const double top = (1.0 - ix.f) * src(iy.i0, ix.i0) + ix.f * src(iy.i0, ix.i1);
      const double bottom = (1.0 - ix.f) * src(iy.i1, ix.i0) + ix.f * src(iy.i1, ix.i1);
      out(y, x) = (1.0 - iy.f) * top + iy.f * bottom;
    }
  }
  return out;
}

Plane<double> bilinear_upsample_backward(const Plane<double>& d_out, int src_height, int src_width) {
  require(src_height >= 1 && src_width >= 1 && d_out.height >= 1 && d_out.width >= 1,
          "bilinear_upsample_backward: empty shape");
  Plane<double> d_src(src_height, src_width);
  for (int y = 0; y < d_out.height; ++y) {
    const Interp iy = source_coord(y, d_out.height, src_height);
    for (int x = 0; x < d_out.width; ++x) {
      const Interp ix = source_coord(x, d_out.width, src_width);
      const double g = d_out(y, x);
      d_src(iy.i0, ix.i0) += (1.0 - iy.f) * (1.0 - ix.f) * g;
      d_src(iy.i0, ix.i1) += (1.0 - iy.f) * ix.f * g;
      d_src(iy.i1, ix.i0) += iy.f * (1.0 - ix.f) * g;
      d_src(iy.i1, ix.i1) += iy.f * ix.f * g;
    }
  }
  return d_src;
}

PredictorOutput predictor_forward(const Image& img, const PredictorParams& params) {
  params.validate();
  require(img.channels == 3, "predictor_forward: expected a 3-channel image");
  require(img.height >= 8 && img.width >= 8, "predictor_forward: image must be at least 8x8");

  PredictorOutput result;
  PredictorTape& tape = result.tape;
  tape.height = img.height;
  tape.width = img.width;

  FeatureMap current(3, img.height, img.width);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) current(c, y, x) = img(y, x, c);

  for (const auto& layer : params.layers) {
    FeatureMap pre = conv_forward(layer, current);
    tape.inputs.push_back(std::move(current));
    current = pre;
    if (layer.relu)
      for (double& v : current.data) v = std::max(v, 0.0);
    tape.pre_activation.push_back(std::move(pre));
  }

  auto channel = [&current](int c) {
    Plane<double> p(current.height, current.width);
    std::copy_n(&current(c, 0, 0), p.size(), p.data.begin());
    return p;
  };
  result.e_hor = bilinear_upsample(channel(0), img.height, img.width);
  result.e_vert = bilinear_upsample(channel(1), img.height, img.width);
  return result;
}

PredictorParams predictor_backward(const PredictorTape& tape, const PredictorParams& params,
                                   const Plane<double>& d_e_hor, const Plane<double>& d_e_vert) {
  require(tape.inputs.size() == params.layers.size() && tape.pre_activation.size() == params.layers.size(),
          "predictor_backward: tape does not match parameters");
  require(d_e_hor.height == tape.height && d_e_hor.width == tape.width && d_e_vert.same_shape(d_e_hor),
          "predictor_backward: seed shape mismatch");

  PredictorParams grads = params;
  for (auto& l : grads.layers) {
    std::fill(l.weights.begin(), l.weights.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }

  const FeatureMap& last = tape.pre_activation.back();
  require(last.channels == 2, "predictor_backward: tape output is not two-channel");
  FeatureMap d_post(2, last.height, last.width);
  const Plane<double> g0 = bilinear_upsample_backward(d_e_hor, last.height, last.width);
  const Plane<double> g1 = bilinear_upsample_backward(d_e_vert, last.height, last.width);
  std::copy(g0.data.begin(), g0.data.end(), &d_post(0, 0, 0));
  std::copy(g1.data.begin(), g1.data.end(), &d_post(1, 0, 0));

  for (int k = static_cast<int>(params.layers.size()) - 1; k >= 0; --k) {
    const ConvLayer& layer = params.layers[k];
    const FeatureMap& pre = tape.pre_activation[k];
    require(pre.channels == d_post.channels && pre.height == d_post.height && pre.width == d_post.width,
            "predictor_backward: activation shape mismatch");
    if (layer.relu)
      for (std::size_t j = 0; j < d_post.data.size(); ++j)
        if (pre.data[j] <= 0.0) d_post.data[j] = 0.0;
    const FeatureMap& in = tape.inputs[k];
    if (k == 0) {
      conv_backward(layer, in, d_post, grads.layers[k], nullptr);
    } else {
      FeatureMap d_in(in.channels, in.height, in.width);
      conv_backward(layer, in, d_post, grads.layers[k], &d_in);
      d_post = std::move(d_in);
    }
  }
  return grads;
}

namespace {

constexpr char kMagic[4] = {'D', 'T', 'P', 'R'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw FormatError("checkpoint: truncated file");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const PredictorParams& params, const std::filesystem::path& path) {
  params.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(params.layers.size()));
  for (const auto& l : params.layers) {
    put_u32(out, static_cast<std::uint32_t>(l.in_channels));
    put_u32(out, static_cast<std::uint32_t>(l.out_channels));
    put_u32(out, static_cast<std::uint32_t>(l.kernel));
    put_u32(out, static_cast<std::uint32_t>(l.stride));
    put_u32(out, l.relu ? 1u : 0u);
  }
  for (const auto& t : params.tensors())
    for (double v : t) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

PredictorParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("checkpoint: bad magic in '" + path.string() + "'");
  const std::uint32_t count = get_u32(in);
  if (count == 0 || count > 64) throw FormatError("checkpoint: implausible layer count");
  PredictorParams params;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto in_ch = get_u32(in);
    const auto out_ch = get_u32(in);
    const auto kernel = get_u32(in);
    const auto stride = get_u32(in);
    const auto relu = get_u32(in);
    if (in_ch == 0 || out_ch == 0 || in_ch > 4096 || out_ch > 4096 || kernel == 0 || kernel > 15 || stride == 0 ||
        stride > 8 || relu > 1)
      throw FormatError("checkpoint: implausible layer header");
    params.layers.emplace_back(static_cast<int>(in_ch), static_cast<int>(out_ch), static_cast<int>(kernel),
                               static_cast<int>(stride), relu == 1);
  }
  for (auto t : params.tensors())
    for (double& v : t) v = std::bit_cast<float>(get_u32(in));
  try {
    params.validate();
  } catch (const ContractError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  return params;
}

}  // namespace dtstereo
