#include "dtstereo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>

#include "dtstereo/dtgrad.hpp"

namespace dtstereo {

AdamState make_adam_state(const PredictorParams& params, const AdamConfig& hyper) {
  require(hyper.lr >= 0.0 && hyper.beta1 >= 0.0 && hyper.beta1 < 1.0 && hyper.beta2 >= 0.0 && hyper.beta2 < 1.0 &&
              hyper.epsilon > 0.0,
          "AdamConfig: hyperparameter out of range");
  AdamState state;
  state.hyper = hyper;
  for (const auto& t : params.tensors()) {
    state.first_moment.emplace_back(t.size(), 0.0);
    state.second_moment.emplace_back(t.size(), 0.0);
  }
  return state;
}

void adam_step(PredictorParams& params, const PredictorParams& grads, AdamState& state) {
  require(params.same_shape(grads), "adam_step: gradient shape does not match parameters");
  auto tensors = params.tensors();
  const auto grad_tensors = grads.tensors();
  require(state.first_moment.size() == tensors.size() && state.second_moment.size() == tensors.size(),
          "adam_step: optimizer state does not match parameters");
  for (std::size_t t = 0; t < tensors.size(); ++t)
    require(state.first_moment[t].size() == tensors[t].size() && state.second_moment[t].size() == tensors[t].size(),
            "adam_step: optimizer state does not match parameters");

  const AdamConfig& h = state.hyper;
  ++state.step;
  const double correction1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    auto& m = state.first_moment[t];
    auto& v = state.second_moment[t];
    for (std::size_t i = 0; i < tensors[t].size(); ++i) {
      const double g = grad_tensors[t][i];
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      tensors[t][i] -= h.lr * m_hat / (std::sqrt(v_hat) + h.epsilon);
    }
  }
}

namespace {

void check_sample(const TrainSample& sample) {
  require(sample.gt.height == sample.pair.height() && sample.gt.width == sample.pair.width(),
          "training sample: ground truth does not match the images");
}

}  // namespace

double pipeline_loss(const TrainSample& sample, const PredictorParams& params, const PipelineConfig& cfg) {
  cfg.validate();
  check_sample(sample);
  const Volume<double> vol = volume_cast<double>(build_cost_volume(sample.pair, cfg.cost, cfg.threads));
  const PredictorOutput pred = predictor_forward(sample.pair.left, params);
  const WeightMaps<double> maps = energy_to_weights(pred.e_hor, pred.e_vert, cfg.dt.sigma);
  const Volume<double> filtered = filter_cost_volume(vol, maps, cfg.threads);
  return softmax_xent_loss(filtered, sample.gt, cfg.loss_scale).loss;
}

LossAndGradient loss_and_gradient(const TrainSample& sample, const PredictorParams& params,
                                  const PipelineConfig& cfg) {
  cfg.validate();
  check_sample(sample);
  const Volume<double> vol = volume_cast<double>(build_cost_volume(sample.pair, cfg.cost, cfg.threads));
  const PredictorOutput pred = predictor_forward(sample.pair.left, params);
  const WeightMaps<double> maps = energy_to_weights(pred.e_hor, pred.e_vert, cfg.dt.sigma);
  const DtTape<double> tape = record_filter_cost_volume(vol, maps, cfg.threads);
  const LossReport report = softmax_xent_loss(tape_output_volume(tape), sample.gt, cfg.loss_scale);

  // The cost volume has no trainable inputs; only the weight path is followed.
  const DtVolumeGradients<double> dt = filter_volume_backward(tape, report.gradient, cfg.threads);
  const Plane<double> d_e_hor = energy_to_weights_backward(pred.e_hor, cfg.dt.sigma, dt.d_horizontal);
  const Plane<double> d_e_vert = energy_to_weights_backward(pred.e_vert, cfg.dt.sigma, dt.d_vertical);

  LossAndGradient out;
  out.loss = report.loss;
  out.valid_count = report.valid_count;
  out.gradient = predictor_backward(pred.tape, params, d_e_hor, d_e_vert);
  return out;
}

double train_step(const TrainSample& sample, PredictorParams& params, AdamState& state, const PipelineConfig& cfg) {
  const LossAndGradient lg = loss_and_gradient(sample, params, cfg);
  adam_step(params, lg.gradient, state);
  return lg.loss;
}

void TrainConfig::validate() const {
  require(iterations >= 1, "TrainConfig: iterations must be >= 1");
  require(lr > 0.0, "TrainConfig: learning rate must be > 0");
  require(checkpoint_every >= 0, "TrainConfig: checkpoint cadence must be >= 0");
  pipeline.validate();
}

TrainResult train(const std::vector<TrainSample>& dataset, const TrainConfig& cfg, const PredictorParams* initial) {
  cfg.validate();
  require(!dataset.empty(), "train: empty dataset");

  TrainResult result;
  result.params = initial ? *initial : init_params(cfg.seed);
  AdamConfig hyper;
  hyper.lr = cfg.lr;
  AdamState state = make_adam_state(result.params, hyper);

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = 0;
  for (int step = 0; step < cfg.iterations; ++step) {
    if (cursor == 0) std::shuffle(order.begin(), order.end(), rng);
    result.losses.push_back(train_step(dataset[order[cursor]], result.params, state, cfg.pipeline));
    cursor = (cursor + 1) % order.size();
    if (!cfg.checkpoint.empty() && cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0)
      save_checkpoint(result.params, cfg.checkpoint);
  }
  if (!cfg.checkpoint.empty()) save_checkpoint(result.params, cfg.checkpoint);
  if (!cfg.loss_curve.empty()) write_loss_curve(result.losses, cfg.loss_curve);
  return result;
}

void write_loss_curve(const std::vector<double>& losses, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "step,loss\n" << std::setprecision(10);
  for (std::size_t i = 0; i < losses.size(); ++i) out << (i + 1) << ',' << losses[i] << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

DatasetSplit split_dataset(std::vector<TrainSample> samples, double validation_fraction) {
  require(validation_fraction >= 0.0 && validation_fraction < 1.0, "split_dataset: fraction must lie in [0,1)");
  const std::size_t n = samples.size();
  std::size_t n_val = static_cast<std::size_t>(std::lround(validation_fraction * static_cast<double>(n)));
  if (validation_fraction > 0.0 && n >= 2) n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  DatasetSplit split;
  split.validation.assign(std::make_move_iterator(samples.end() - static_cast<long>(n_val)),
                          std::make_move_iterator(samples.end()));
  samples.resize(n - n_val);
  split.train = std::move(samples);
  return split;
}

std::vector<TrainSample> load_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path left_dir = dir / "left";
  if (!fs::is_directory(left_dir)) throw IoError("dataset: missing directory '" + left_dir.string() + "'");
  std::vector<fs::path> names;
  for (const auto& entry : fs::directory_iterator(left_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".png") names.push_back(entry.path().filename());
  std::sort(names.begin(), names.end());
  std::vector<TrainSample> samples;
  for (const auto& name : names) {
    TrainSample s;
    s.pair = make_stereo_pair(load_image(left_dir / name), load_image(dir / "right" / name));
    s.gt = load_disparity_kitti(dir / "disp" / name);
    check_sample(s);
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace dtstereo
