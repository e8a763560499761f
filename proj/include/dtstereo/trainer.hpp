#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dtstereo/matcher.hpp"
#include "dtstereo/predictor.hpp"

namespace dtstereo {

struct AdamConfig {
  double lr = 2.5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig hyper;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  long step = 0;
};

AdamState make_adam_state(const PredictorParams& params, const AdamConfig& hyper = {});

// Bias-corrected ADAM update of every parameter tensor.
void adam_step(PredictorParams& params, const PredictorParams& grads, AdamState& state);

struct TrainSample {
  StereoPair pair;
  DisparityMap gt;  // left-view ground truth
};

struct LossAndGradient {
  double loss = 0.0;
  std::size_t valid_count = 0;
  PredictorParams gradient;
};

// Forward loss of the differentiable path (left view only, computed in 64-bit).
double pipeline_loss(const TrainSample& sample, const PredictorParams& params, const PipelineConfig& cfg);

// Loss and its exact gradient with respect to every predictor parameter.
LossAndGradient loss_and_gradient(const TrainSample& sample, const PredictorParams& params,
                                  const PipelineConfig& cfg);

// One forward/backward/ADAM update; returns the loss before the update.
double train_step(const TrainSample& sample, PredictorParams& params, AdamState& state, const PipelineConfig& cfg);

struct TrainConfig {
  int iterations = 1;
  double lr = 2.5e-5;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // 0: only at the end
  std::filesystem::path checkpoint;  // empty: no checkpoint files
  std::filesystem::path loss_curve;  // empty: no CSV
  PipelineConfig pipeline;

  void validate() const;
};

struct TrainResult {
  PredictorParams params;
  std::vector<double> losses;  // one entry per step
};

// Visits the samples in a seeded per-epoch shuffle. Starts from `initial`
// when given, otherwise from init_params(seed).
TrainResult train(const std::vector<TrainSample>& dataset, const TrainConfig& cfg,
                  const PredictorParams* initial = nullptr);

// Writes "step,loss" with one row per step (steps counted from 1).
void write_loss_curve(const std::vector<double>& losses, const std::filesystem::path& path);

// Deterministic train/validation split: the last `validation_fraction` of the
// samples (at least one when there are two or more) go to validation.
struct DatasetSplit {
  std::vector<TrainSample> train;
  std::vector<TrainSample> validation;
};
DatasetSplit split_dataset(std::vector<TrainSample> samples, double validation_fraction);

// Directory layout: left/NNN.png, right/NNN.png, disp/NNN.png (KITTI codec),
// samples sorted by file name.
std::vector<TrainSample> load_dataset(const std::filesystem::path& dir);

}  // namespace dtstereo
