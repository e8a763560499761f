#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "dtstereo/error.hpp"
#include "oracles.hpp"

using namespace dtstereo;

namespace {

FeatureMap planar(const Image& img) {
  FeatureMap f(img.channels, img.height, img.width);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) f(c, y, x) = img(y, x, c);
  return f;
}

PredictorParams random_params(std::mt19937_64& rng, double bias_scale = 0.1) {
  PredictorParams p = init_params(rng());
  std::normal_distribution<double> n(0.0, 1.0);
  auto& head = p.layers.back();
  for (double& w : head.weights) w = 0.3 * n(rng);
  for (auto& layer : p.layers)
    for (double& b : layer.bias) b = bias_scale * n(rng);
  return p;
}

}  // namespace

TEST_CASE("zero network emits zero energy") {
  std::mt19937_64 rng(1);
  const auto out = predictor_forward(oracle::random_image(10, 12, 3, rng), PredictorParams::default_architecture());
  CHECK(out.e_hor.height == 10);
  CHECK(out.e_hor.width == 12);
  for (double v : out.e_hor.data) CHECK(v == 0.0);
  for (double v : out.e_vert.data) CHECK(v == 0.0);

  // The He-initialised network also starts at zero: its head is zero.
  const auto init = predictor_forward(oracle::random_image(10, 12, 3, rng), init_params(7));
  for (double v : init.e_hor.data) CHECK(v == 0.0);
}

TEST_CASE("uniform predictor produces the requested gate") {
  std::mt19937_64 rng(2);
  const auto out = predictor_forward(oracle::random_image(9, 9, 3, rng), uniform_predictor(0.7, 4.0));
  const auto maps = energy_to_weights(out.e_hor, out.e_vert, 4.0);
  for (double v : maps.horizontal.data) CHECK(v == doctest::Approx(0.7).epsilon(1e-12));
  for (double v : maps.vertical.data) CHECK(v == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("constant input gives a constant interior") {
  std::mt19937_64 rng(3);
  const auto out = predictor_forward(Image(24, 24, 3, 0.6f), random_params(rng));
  // Half-resolution receptive field reaches 5 px into the border.
  const double ref = out.e_hor(12, 12);
  for (int y = 8; y < 16; ++y)
    for (int x = 8; x < 16; ++x) CHECK(out.e_hor(y, x) == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("convolution matches the six-loop oracle") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int k = trial % 2 ? 3 : 1;
    const int s = trial % 3 == 0 ? 2 : 1;
    ConvLayer layer(3, 4, k, s, trial % 2 == 0);
    for (double& w : layer.weights) w = n(rng);
    for (double& b : layer.bias) b = n(rng);
    const int h = oracle::random_int(rng, 1, 9);
    const int w = oracle::random_int(rng, 1, 9);
    FeatureMap in = planar(oracle::random_image(h, w, 3, rng));
    FeatureMap out = conv_forward(layer, in);
    if (layer.relu)
      for (double& v : out.data) v = std::max(v, 0.0);
    const FeatureMap ref = oracle::conv(layer, in);
    REQUIRE(out.height == ref.height);
    REQUIRE(out.width == ref.width);
    for (std::size_t i = 0; i < out.data.size(); ++i)
      REQUIRE(oracle::rel_error(out.data[i], ref.data[i], 1e-300) < 1e-12);
  }
}

TEST_CASE("full forward matches a chain of oracle convolutions") {
  std::mt19937_64 rng(5);
  const Image img = oracle::random_image(16, 16, 3, rng);
  const PredictorParams p = random_params(rng);
  FeatureMap f = planar(img);
  for (const auto& layer : p.layers) f = oracle::conv(layer, f);
  REQUIRE(f.height == 8);
  Plane<double> half_h(8, 8), half_v(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      half_h(y, x) = f(0, y, x);
      half_v(y, x) = f(1, y, x);
    }
  // Upsampling oracle: align-corners, coordinate y * (8-1)/(16-1).
  auto sample = [](const Plane<double>& src, int y, int x) {
    const double sy = y * 7.0 / 15.0, sx = x * 7.0 / 15.0;
    const int y0 = std::min(static_cast<int>(sy), 6), x0 = std::min(static_cast<int>(sx), 6);
    const double fy = sy - y0, fx = sx - x0;
    return (1 - fy) * ((1 - fx) * src(y0, x0) + fx * src(y0, x0 + 1)) +
           fy * ((1 - fx) * src(y0 + 1, x0) + fx * src(y0 + 1, x0 + 1));
  };
  const auto out = predictor_forward(img, p);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      CHECK(oracle::rel_error(out.e_hor(y, x), sample(half_h, y, x), 1e-300) < 1e-10);
      CHECK(oracle::rel_error(out.e_vert(y, x), sample(half_v, y, x), 1e-300) < 1e-10);
    }
}

TEST_CASE("odd sizes use ceil(h/2) internally") {
  std::mt19937_64 rng(6);
  const auto out = predictor_forward(oracle::random_image(11, 13, 3, rng), random_params(rng));
  CHECK(out.tape.pre_activation.back().height == 6);
  CHECK(out.tape.pre_activation.back().width == 7);
  CHECK(out.e_hor.height == 11);
  CHECK_THROWS_AS(predictor_forward(Image(4, 4, 3), init_params(0)), ContractError);
  CHECK_THROWS_AS(predictor_forward(Image(9, 9, 1), init_params(0)), ContractError);
}

TEST_CASE("bilinear upsampling") {
  Plane<double> ramp(2, 2);
  ramp(0, 1) = ramp(1, 1) = 1.0;
  const auto up = bilinear_upsample(ramp, 2, 4);
  for (int y = 0; y < 2; ++y) {
    CHECK(up(y, 0) == 0.0);
    CHECK(up(y, 1) == doctest::Approx(1.0 / 3));
    CHECK(up(y, 2) == doctest::Approx(2.0 / 3));
    CHECK(up(y, 3) == 1.0);
  }
  for (double v : bilinear_upsample(Plane<double>(3, 5, 0.25), 6, 10).data) CHECK(v == doctest::Approx(0.25));
  CHECK(bilinear_upsample(Plane<double>(1, 1, 2.0), 3, 3)(2, 2) == 2.0);

  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const int sh = oracle::random_int(rng, 1, 5), sw = oracle::random_int(rng, 1, 5);
    const int th = oracle::random_int(rng, sh, 11), tw = oracle::random_int(rng, sw, 11);
    auto src = oracle::random_plane<double>(sh, sw, rng);
    const auto seed = oracle::random_plane<double>(th, tw, rng, -1, 1);
    auto loss = [&] {
      const auto o = bilinear_upsample(src, th, tw);
      double s = 0.0;
      for (std::size_t i = 0; i < o.size(); ++i) s += o.data[i] * seed.data[i];
      return s;
    };
    const auto grad = bilinear_upsample_backward(seed, sh, sw);
    for (std::size_t i = 0; i < src.size(); ++i)
      CHECK(oracle::rel_error(grad.data[i], oracle::central_difference(loss, src.data[i])) < 1e-7);
  }
}

TEST_CASE("zero seed gives zero gradients") {
  std::mt19937_64 rng(8);
  const PredictorParams p = random_params(rng);
  const auto out = predictor_forward(oracle::random_image(10, 10, 3, rng), p);
  const auto g = predictor_backward(out.tape, p, Plane<double>(10, 10, 0.0), Plane<double>(10, 10, 0.0));
  for (auto t : g.tensors())
    for (double v : t) CHECK(v == 0.0);
}

TEST_CASE("single 1x1 layer closed form") {
  std::mt19937_64 rng(9);
  PredictorParams p;
  p.layers.emplace_back(3, 16, 3, 2, true);
  p.layers.emplace_back(16, 2, 1, 1, false);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& l : p.layers) {
    for (double& w : l.weights) w = n(rng);
    for (double& b : l.bias) b = n(rng);
  }
  const int h = 8, w = 8;
  const auto out = predictor_forward(oracle::random_image(h, w, 3, rng), p);
  const auto seed_h = oracle::random_plane<double>(h, w, rng, -1, 1);
  const Plane<double> seed_v(h, w, 0.0);
  const auto g = predictor_backward(out.tape, p, seed_h, seed_v);
  // Gradient at the half-resolution output is the upsample adjoint of the seed.
  const auto d_half = bilinear_upsample_backward(seed_h, 4, 4);
  const FeatureMap& act = out.tape.inputs[1];
  for (int i = 0; i < 16; ++i) {
    double expected = 0.0;
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) expected += act(i, y, x) * d_half(y, x);
    CHECK(g.layers[1].weight(0, i, 0, 0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(g.layers[1].weight(1, i, 0, 0) == 0.0);
  }
  double bias = 0.0;
  for (double v : d_half.data) bias += v;
  CHECK(g.layers[1].bias[0] == doctest::Approx(bias).epsilon(1e-12));
}

TEST_CASE("parameter gradients match finite differences") {
  std::mt19937_64 rng(10);
  PredictorParams p = random_params(rng, 0.3);
  const Image img = oracle::random_image(10, 9, 3, rng);
  const auto seed_h = oracle::random_plane<double>(10, 9, rng, -1, 1);
  const auto seed_v = oracle::random_plane<double>(10, 9, rng, -1, 1);
  auto loss = [&] {
    const auto out = predictor_forward(img, p);
    double s = 0.0;
    for (std::size_t i = 0; i < seed_h.size(); ++i) s += out.e_hor.data[i] * seed_h.data[i] + out.e_vert.data[i] * seed_v.data[i];
    return s;
  };
  const auto g = predictor_backward(predictor_forward(img, p).tape, p, seed_h, seed_v);
  auto tensors = p.tensors();
  const auto grads = g.tensors();
  int checked = 0;
  double worst = 0.0;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    for (std::size_t i = 0; i < tensors[t].size(); i += 7) {
      worst = std::max(worst, oracle::rel_error(grads[t][i], oracle::central_difference(loss, tensors[t][i])));
      ++checked;
    }
  }
  CHECK(checked > 100);
  CHECK(worst < 1e-4);
}

TEST_CASE("initialisation statistics and determinism") {
  const PredictorParams a = init_params(42);
  const PredictorParams b = init_params(42);
  const PredictorParams c = init_params(43);
  CHECK(a.layers[0].weights == b.layers[0].weights);
  CHECK(a.layers[0].weights != c.layers[0].weights);
  a.validate();
  for (std::size_t l = 0; l + 1 < a.layers.size(); ++l) {
    const auto& layer = a.layers[l];
    double sq = 0.0;
    for (double w : layer.weights) sq += w * w;
    const double std_dev = std::sqrt(sq / layer.weights.size());
    const double target = std::sqrt(2.0 / (layer.in_channels * layer.kernel * layer.kernel));
    CHECK(std::abs(std_dev / target - 1.0) < 0.2);
    for (double v : layer.bias) CHECK(v == 0.0);
  }
  for (double w : a.layers.back().weights) CHECK(w == 0.0);
}

TEST_CASE("checkpoint round trip and corruption") {
  std::mt19937_64 rng(11);
  const PredictorParams p = random_params(rng);
  const auto path = std::filesystem::temp_directory_path() / "dtstereo_test.ckpt";
  save_checkpoint(p, path);
  const PredictorParams q = load_checkpoint(path);
  REQUIRE(q.same_shape(p));
  const auto a = p.tensors();
  const auto b = q.tensors();
  for (std::size_t t = 0; t < a.size(); ++t)
    for (std::size_t i = 0; i < a[t].size(); ++i) REQUIRE(b[t][i] == static_cast<float>(a[t][i]));

  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 3);
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE";
  }
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
}
