#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "dtstereo/error.hpp"
#include "dtstereo/synth.hpp"
#include "dtstereo/trainer.hpp"
#include "oracles.hpp"

using namespace dtstereo;
namespace fs = std::filesystem;

namespace {

PredictorParams single_param(double value) {
  PredictorParams p;
  p.layers.emplace_back(3, 2, 1, 1, false);
  p.layers[0].bias = {value, 0.0};
  return p;
}

TrainSample sample_from(const SynthScene& s) { return {make_stereo_pair(s.left, s.right), s.left_gt}; }

PipelineConfig small_config(int d_max) {
  PipelineConfig cfg;
  cfg.cost.d_max = d_max;
  cfg.loss_scale = 10.0;
  return cfg;
}

}  // namespace

TEST_CASE("ADAM: zero gradient leaves parameters alone") {
  PredictorParams p = single_param(0.5);
  AdamState s = make_adam_state(p);
  adam_step(p, single_param(0.0), s);
  CHECK(p.layers[0].bias[0] == 0.5);
  CHECK(s.step == 1);
}

TEST_CASE("ADAM: two hand-computed steps") {
  PredictorParams p = single_param(1.0);
  AdamState s = make_adam_state(p, {0.1, 0.9, 0.999, 1e-8});
  adam_step(p, single_param(0.5), s);
  // m1 = 0.05, v1 = 0.00025; bias-corrected both give |step| = lr.
  const double first = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
  CHECK(p.layers[0].bias[0] == doctest::Approx(first).epsilon(1e-15));
  adam_step(p, single_param(-1.0), s);
  const double m2 = 0.9 * 0.05 + 0.1 * -1.0;
  const double v2 = 0.999 * 0.00025 + 0.001 * 1.0;
  const double m_hat = m2 / (1 - 0.81);
  const double v_hat = v2 / (1 - 0.999 * 0.999);
  CHECK(p.layers[0].bias[0] == doctest::Approx(first - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8)).epsilon(1e-12));
}

TEST_CASE("ADAM: constant gradient moves by lr per step") {
  PredictorParams p = single_param(0.0);
  AdamState s = make_adam_state(p, {1e-3, 0.9, 0.999, 1e-8});
  double before = 0.0;
  for (int i = 0; i < 500; ++i) {
    before = p.layers[0].bias[0];
    adam_step(p, single_param(3.7), s);
  }
  CHECK(before - p.layers[0].bias[0] == doctest::Approx(1e-3).epsilon(1e-6));
}

TEST_CASE("end-to-end gradient matches finite differences") {
  const SynthScene s = make_synthetic(SynthKind::Planes, 12, 16, 8, 3, 0.05);
  const TrainSample sample = sample_from(s);
  PipelineConfig cfg = small_config(4);
  std::mt19937_64 rng(5);
  PredictorParams p = init_params(9);
  std::normal_distribution<double> n(0.0, 0.3);
  for (double& w : p.layers.back().weights) w = n(rng);
  p.layers.back().bias = {0.1, 0.15};

  const LossAndGradient lg = loss_and_gradient(sample, p, cfg);
  CHECK(lg.loss == doctest::Approx(pipeline_loss(sample, p, cfg)).epsilon(1e-12));
  auto loss = [&] { return pipeline_loss(sample, p, cfg); };
  auto tensors = p.tensors();
  const auto grads = lg.gradient.tensors();
  double worst = 0.0;
  for (std::size_t t = 0; t < tensors.size(); ++t)
    for (std::size_t i = 0; i < tensors[t].size(); i += 11)
      worst = std::max(worst, oracle::rel_error(grads[t][i], oracle::central_difference(loss, tensors[t][i])));
  CHECK(worst < 1e-3);
}

TEST_CASE("zero-output predictor is a fixed point of the loss") {
  const TrainSample sample = sample_from(make_synthetic(SynthKind::Planes, 16, 24, 8, 1, 0.02));
  PipelineConfig cfg = small_config(8);
  // Only the head sees a gradient while the head is zero; the first step
  // moves it, the loss value at step one is reproducible.
  const PredictorParams p = init_params(1);
  const double a = pipeline_loss(sample, p, cfg);
  CHECK(std::isfinite(a));
  CHECK(pipeline_loss(sample, p, cfg) == a);
  const auto g = loss_and_gradient(sample, p, cfg).gradient;
  for (std::size_t l = 0; l + 1 < g.layers.size(); ++l)
    for (double v : g.layers[l].weights) CHECK(v == 0.0);
  double head = 0.0;
  for (double v : g.layers.back().weights) head += std::abs(v);
  CHECK(head > 0.0);
}

TEST_CASE("training reduces the loss on one pair") {
  const TrainSample sample = sample_from(make_synthetic(SynthKind::Planes, 24, 32, 12, 2, 0.05));
  TrainConfig cfg;
  cfg.iterations = 200;
  cfg.lr = 1e-3;
  cfg.seed = 4;
  cfg.pipeline = small_config(12);
  const TrainResult r = train({sample}, cfg);
  REQUIRE(r.losses.size() == 200);
  CHECK(r.losses.back() <= 0.5 * r.losses.front());
}

TEST_CASE("training is deterministic and writes its artefacts") {
  const fs::path dir = fs::temp_directory_path() / "dtstereo_test_train";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::vector<TrainSample> data = {sample_from(make_synthetic(SynthKind::Planes, 16, 24, 8, 1, 0.02)),
                                         sample_from(make_synthetic(SynthKind::Planes, 16, 24, 8, 2, 0.02))};
  TrainConfig cfg;
  cfg.iterations = 1;
  cfg.seed = 3;
  cfg.pipeline = small_config(8);
  cfg.checkpoint = dir / "one.ckpt";
  cfg.loss_curve = dir / "one.csv";
  train(data, cfg);
  CHECK(fs::exists(cfg.checkpoint));
  std::ifstream csv(cfg.loss_curve);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(csv, line)) lines.push_back(line);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == "step,loss");
  CHECK(lines[1].rfind("1,", 0) == 0);

  cfg.iterations = 6;
  cfg.lr = 1e-3;
  cfg.checkpoint = dir / "run.ckpt";
  cfg.checkpoint_every = 3;
  cfg.loss_curve.clear();
  const TrainResult a = train(data, cfg);
  const TrainResult b = train(data, cfg);
  CHECK(a.losses == b.losses);
  CHECK(a.params.layers.back().weights == b.params.layers.back().weights);
  cfg.seed = 4;
  CHECK(train(data, cfg).losses != a.losses);

  cfg.iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  CHECK_THROWS_AS(train({}, TrainConfig{}), ContractError);
}

TEST_CASE("dataset split and loading") {
  std::vector<TrainSample> five;
  for (int i = 0; i < 5; ++i) five.push_back(sample_from(make_synthetic(SynthKind::RandomDots, 8, 16, 8, i, 0.0)));
  const DatasetSplit s = split_dataset(five, 0.2);
  CHECK(s.train.size() == 4);
  CHECK(s.validation.size() == 1);
  CHECK(s.validation[0].gt.values == five[4].gt.values);
  CHECK(split_dataset(five, 0.0).validation.empty());

  const fs::path dir = fs::temp_directory_path() / "dtstereo_test_dataset";
  fs::remove_all(dir);
  for (const char* sub : {"left", "right", "disp"}) fs::create_directories(dir / sub);
  for (int i = 0; i < 2; ++i) {
    const SynthScene sc = make_synthetic(SynthKind::Planes, 16, 24, 8, i, 0.0);
    const std::string name = "00" + std::to_string(i) + ".png";
    save_image(sc.left, dir / "left" / name);
    save_image(sc.right, dir / "right" / name);
    save_disparity(sc.left_gt, dir / "disp" / name);
  }
  const auto loaded = load_dataset(dir);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[1].gt.valid_count() == 16 * 24);
  fs::remove(dir / "right" / "001.png");
  CHECK_THROWS(load_dataset(dir));
}
