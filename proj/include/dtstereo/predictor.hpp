#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dtstereo/imageio.hpp"
#include "dtstereo/tensor.hpp"

namespace dtstereo {

// Zero-padded ("same") 2-D convolution, optionally followed by ReLU.
// weights are laid out [out][in][ky][kx].
struct ConvLayer {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  bool relu = false;
  std::vector<double> weights;
  std::vector<double> bias;

  ConvLayer() = default;
  ConvLayer(int in, int out, int k, int s, bool r)
      : in_channels(in),
        out_channels(out),
        kernel(k),
        stride(s),
        relu(r),
        weights(static_cast<std::size_t>(out) * in * k * k, 0.0),
        bias(out, 0.0) {}

  int padding() const { return kernel / 2; }
  int output_size(int n) const { return (n + 2 * padding() - kernel) / stride + 1; }
  double& weight(int o, int i, int ky, int kx) {
    return weights[((static_cast<std::size_t>(o) * in_channels + i) * kernel + ky) * kernel + kx];
  }
  double weight(int o, int i, int ky, int kx) const {
    return weights[((static_cast<std::size_t>(o) * in_channels + i) * kernel + ky) * kernel + kx];
  }
};

// Trainable weight-energy predictor. The default stack is
//   3x3 3->16 ReLU, 3x3/2 16->16 ReLU, 3x3 16->16 ReLU, 3x3 16->8 ReLU, 1x1 8->2
// and emits (e_hor, e_vert) at half resolution.
struct PredictorParams {
  std::vector<ConvLayer> layers;

  static PredictorParams default_architecture();  // all parameters zero

  std::size_t parameter_count() const;
  // Flat views over every tensor (weights then bias, layer by layer).
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  void validate() const;
  bool same_shape(const PredictorParams& other) const;
};

// He-normal kernels (std = sqrt(2 / fan_in)), zero biases, zero output layer.
PredictorParams init_params(std::uint64_t seed);

// Default architecture whose output is the constant energy -ln(gate) / sigma,
// i.e. uniform weight maps equal to `gate` after exp(-sigma e).
PredictorParams uniform_predictor(double gate, double sigma);

// Channel-planar activations: data[(c * height + y) * width + x].
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w) : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w) {}
  double& operator()(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  const double& operator()(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

FeatureMap conv_forward(const ConvLayer& layer, const FeatureMap& in);

struct PredictorTape {
  int height = 0;  // full-resolution target size
  int width = 0;
  std::vector<FeatureMap> inputs;        // input of layer k
  std::vector<FeatureMap> pre_activation;  // conv output of layer k before ReLU
};

struct PredictorOutput {
  Plane<double> e_hor;
  Plane<double> e_vert;
  PredictorTape tape;
};

PredictorOutput predictor_forward(const Image& img, const PredictorParams& params);

// Gradients come back shaped like the parameters.
PredictorParams predictor_backward(const PredictorTape& tape, const PredictorParams& params,
                                   const Plane<double>& d_e_hor, const Plane<double>& d_e_vert);

// Align-corners bilinear resize.
Plane<double> bilinear_upsample(const Plane<double>& src, int height, int width);
Plane<double> bilinear_upsample_backward(const Plane<double>& d_out, int src_height, int src_width);

// Flat checkpoint: "DTPR", uint32 layer count, per layer uint32
// (in, out, kernel, stride, relu), then float32 weights and biases.
// All integers and floats little-endian.
void save_checkpoint(const PredictorParams& params, const std::filesystem::path& path);
PredictorParams load_checkpoint(const std::filesystem::path& path);

}  // namespace dtstereo
