#include "dtstereo/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <string>

#include "dtstereo/evalbench.hpp"
#include "dtstereo/matcher.hpp"
#include "dtstereo/synth.hpp"
#include "dtstereo/trainer.hpp"

namespace dtstereo {

namespace {

namespace fs = std::filesystem;

// Flags shared by every subcommand that runs the pipeline.
struct PipelineFlags {
  int dmax = 128;
  double alpha = 0.43;
  double sigma = 4.0;
  int census = 7;
  bool no_aggregation = false;
  bool no_lr_check = false;
  int threads = 1;
  double uniform_gate = 0.7;

  void attach(CLI::App& cmd) {
    cmd.add_option("--dmax", dmax, "maximum disparity")->check(CLI::Range(1, 1024));
    cmd.add_option("--alpha", alpha, "SAD weight in the blended cost")->check(CLI::Range(0.0, 1.0));
    cmd.add_option("--sigma", sigma, "energy-to-weight scale")->check(CLI::PositiveNumber);
    cmd.add_option("--census", census, "census window side (odd)")->check(CLI::Range(3, 15));
    cmd.add_option("--threads", threads, "worker threads")->check(CLI::Range(1, 256));
  }
  void attach_switches(CLI::App& cmd) {
    cmd.add_flag("--no-aggregation", no_aggregation, "skip domain-transform aggregation");
    cmd.add_flag("--no-lr-check", no_lr_check, "skip the left-right consistency check");
    cmd.add_option("--uniform-weight", uniform_gate, "gate used when no checkpoint is given")
        ->check(CLI::Range(0.01, 1.0));
  }

  PipelineConfig config() const {
    PipelineConfig cfg;
    cfg.cost.d_max = dmax;
    cfg.cost.alpha = alpha;
    cfg.cost.census_patch = census;
    cfg.dt.sigma = sigma;
    cfg.enable_aggregation = !no_aggregation;
    cfg.enable_lr_check = !no_lr_check;
    cfg.threads = threads;
    return cfg;
  }

  PredictorParams predictor(const std::string& ckpt) const {
    return ckpt.empty() ? uniform_predictor(uniform_gate, sigma) : load_checkpoint(ckpt);
  }
};

std::string sample_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d.png", i);
  return buf;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stereo matching with learned domain-transform cost aggregation", "dtstereo"};
  app.require_subcommand(1);

  // match
  auto* match_cmd = app.add_subcommand("match", "compute a disparity map for a rectified pair");
  std::string left, right, out_path, ckpt;
  PipelineFlags match_flags;
  match_cmd->add_option("--left", left, "left image")->required();
  match_cmd->add_option("--right", right, "right image")->required();
  match_cmd->add_option("--out", out_path, "output disparity PNG (KITTI encoding)")->required();
  match_cmd->add_option("--ckpt", ckpt, "predictor checkpoint");
  match_flags.attach(*match_cmd);
  match_flags.attach_switches(*match_cmd);

  // train
  auto* train_cmd = app.add_subcommand("train", "train the weight predictor end to end");
  std::string data_dir, train_out, loss_curve, init_ckpt;
  int iters = 1;
  double lr = 2.5e-5;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;
  double loss_scale = 10.0;
  double validation_fraction = 0.0;
  PipelineFlags train_flags;
  train_cmd->add_option("--data", data_dir, "dataset directory with left/, right/, disp/")->required();
  train_cmd->add_option("--out", train_out, "checkpoint to write")->required();
  train_cmd->add_option("--iters", iters, "training steps")->required()->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", lr, "ADAM learning rate")->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", seed, "random seed");
  train_cmd->add_option("--loss-curve", loss_curve, "CSV loss curve (default: <out>.loss.csv)");
  train_cmd->add_option("--checkpoint-every", checkpoint_every, "checkpoint cadence in steps")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--loss-scale", loss_scale, "softmax inverse temperature")->check(CLI::PositiveNumber);
  train_cmd->add_option("--validation-fraction", validation_fraction, "share of samples held out")
      ->check(CLI::Range(0.0, 0.9));
  train_cmd->add_option("--init", init_ckpt, "start from this checkpoint");
  train_flags.attach(*train_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score a disparity map against ground truth");
  std::string pred_path, gt_path;
  eval_cmd->add_option("--pred", pred_path, "predicted disparity PNG")->required();
  eval_cmd->add_option("--gt", gt_path, "ground-truth disparity PNG")->required();

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "per-stage timing of the matching pipeline");
  std::string bench_left, bench_right, bench_ckpt, bench_csv;
  int repeats = 5;
  PipelineFlags bench_flags;
  bench_cmd->add_option("--left", bench_left, "left image")->required();
  bench_cmd->add_option("--right", bench_right, "right image")->required();
  bench_cmd->add_option("--repeats", repeats, "timed runs")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--ckpt", bench_ckpt, "predictor checkpoint");
  bench_cmd->add_option("--csv", bench_csv, "also write the report as CSV");
  bench_flags.attach(*bench_cmd);
  bench_flags.attach_switches(*bench_cmd);

  // viz-weights
  auto* viz_cmd = app.add_subcommand("viz-weights", "export predicted weight maps as grayscale images");
  std::string viz_left, viz_ckpt, viz_prefix;
  double viz_sigma = 4.0;
  viz_cmd->add_option("--left", viz_left, "input image")->required();
  viz_cmd->add_option("--ckpt", viz_ckpt, "predictor checkpoint")->required();
  viz_cmd->add_option("--out-prefix", viz_prefix, "output prefix; writes <prefix>w_hor.png, <prefix>w_vert.png")
      ->required();
  viz_cmd->add_option("--sigma", viz_sigma, "energy-to-weight scale")->check(CLI::PositiveNumber);

  // make-synth
  auto* synth_cmd = app.add_subcommand("make-synth", "generate synthetic stereo pairs with dense ground truth");
  std::string synth_out, synth_kind;
  std::uint64_t synth_seed = 0;
  int count = 5, width = 96, height = 64, synth_dmax = 32;
  double noise = 0.02;
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--kind", synth_kind, "scene kind")->required()->check(CLI::IsMember({"rds", "planes"}));
  synth_cmd->add_option("--seed", synth_seed, "random seed")->required();
  synth_cmd->add_option("--count", count, "number of pairs")->check(CLI::Range(1, 10000));
  synth_cmd->add_option("--width", width, "image width")->check(CLI::Range(16, 4096));
  synth_cmd->add_option("--height", height, "image height")->check(CLI::Range(8, 4096));
  synth_cmd->add_option("--dmax", synth_dmax, "largest disparity")->check(CLI::Range(8, 1024));
  synth_cmd->add_option("--noise", noise, "right-view noise stddev")->check(CLI::Range(0.0, 1.0));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return 2;
  }

  try {
    if (match_cmd->parsed()) {
      const StereoPair pair = make_stereo_pair(load_image(left), load_image(right));
      const DisparityMap disp = match(pair, match_flags.predictor(ckpt), match_flags.config());
      save_disparity(disp, out_path);
    } else if (train_cmd->parsed()) {
      TrainConfig cfg;
      cfg.iterations = iters;
      cfg.lr = lr;
      cfg.seed = seed;
      cfg.checkpoint = train_out;
      cfg.checkpoint_every = checkpoint_every;
      cfg.loss_curve = loss_curve.empty() ? fs::path(train_out + ".loss.csv") : fs::path(loss_curve);
      cfg.pipeline = train_flags.config();
      cfg.pipeline.loss_scale = loss_scale;
      DatasetSplit split = split_dataset(load_dataset(data_dir), validation_fraction);
      std::optional<PredictorParams> initial;
      if (!init_ckpt.empty()) initial = load_checkpoint(init_ckpt);
      const TrainResult result = train(split.train, cfg, initial ? &*initial : nullptr);
      out << "trained " << iters << " steps on " << split.train.size() << " pairs; final loss "
          << result.losses.back() << '\n';
      if (!split.validation.empty()) {
        PipelineConfig eval_cfg = cfg.pipeline;
        eval_cfg.enable_lr_check = false;
        out << "validation bad-pixel rate " << std::fixed << std::setprecision(4)
            << mean_bad_pixel_rate(split.validation, result.params, eval_cfg) << '\n';
      }
    } else if (eval_cmd->parsed()) {
      const EvalReport report = bad_pixel_rate(load_disparity_kitti(pred_path), load_disparity_kitti(gt_path));
      out << std::fixed << std::setprecision(3) << "bad-pixel rate " << report.bad_pixel_rate << '\n'
          << "mean abs error " << report.mean_abs_error << '\n'
          << "valid pixels " << report.valid_count << '\n';
    } else if (bench_cmd->parsed()) {
      const StereoPair pair = make_stereo_pair(load_image(bench_left), load_image(bench_right));
      const TimingReport report =
          benchmark(pair, bench_flags.predictor(bench_ckpt), bench_flags.config(), repeats);
      out << format_timing_table(report);
      if (!bench_csv.empty()) {
        std::ofstream csv(bench_csv);
        if (!csv) throw IoError("cannot open '" + bench_csv + "' for writing");
        csv << format_timing_csv(report);
      }
    } else if (viz_cmd->parsed()) {
      DtParams dt;
      dt.sigma = viz_sigma;
      Image img = load_image(viz_left);
      if (img.channels == 1) img = make_stereo_pair(img, img).left;
      const WeightMaps<float> maps = predict_weights(img, load_checkpoint(viz_ckpt), dt);
      save_image(weight_map_image(maps.horizontal), viz_prefix + "w_hor.png");
      save_image(weight_map_image(maps.vertical), viz_prefix + "w_vert.png");
    } else if (synth_cmd->parsed()) {
      const SynthKind kind = parse_synth_kind(synth_kind);
      for (const char* sub : {"left", "right", "disp"}) fs::create_directories(fs::path(synth_out) / sub);
      for (int i = 0; i < count; ++i) {
        const SynthScene scene =
            make_synthetic(kind, height, width, synth_dmax, synth_seed * 1000003ULL + static_cast<std::uint64_t>(i),
                           noise);
        const std::string name = sample_name(i);
        save_image(scene.left, fs::path(synth_out) / "left" / name);
        save_image(scene.right, fs::path(synth_out) / "right" / name);
        save_disparity(scene.left_gt, fs::path(synth_out) / "disp" / name);
      }
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace dtstereo
