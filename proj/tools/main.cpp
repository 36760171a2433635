// mctrack command-line front end: scenario generation, per-camera tracking,
// metric training, cross-camera re-identification, and evaluation.
//
// Exit codes: 0 success, 1 usage/config error, 2 data error.

#include <CLI11.hpp>

#include "mctrack/config.hpp"
#include "mctrack/errors.hpp"
#include "mctrack/eval.hpp"
#include "mctrack/pipeline.hpp"
#include "mctrack/sim.hpp"

#include <cstdint>
#include <iostream>
#include <string>

namespace {

struct SimgenArgs {
  std::string config;
  std::string out;
  mctrack::ScenarioParams params;
  CLI::App* cmd = nullptr;
};

struct TrackArgs {
  std::string config;
  std::string out;
  std::string tracker;
  std::string roi_filter;       // "", "on", "off"
  std::string variance_filter;  // "", "on", "off"
  std::uint64_t seed = 0;
  CLI::App* cmd = nullptr;
};

struct TrainArgs {
  std::string config;
  std::string out;
  std::string loss_out;
  std::uint64_t seed = 0;
  CLI::App* cmd = nullptr;
};

struct ReidArgs {
  std::string config;
  std::string model;
  std::string tracks;
  std::string out;
  double max_dist = -1.0;
  std::uint64_t seed = 0;
  CLI::App* cmd = nullptr;
};

struct EvalArgs {
  std::string config;
  std::string mode;
  std::string tracks;
  std::string pred;
  std::string out;
  std::uint64_t seed = 0;
  CLI::App* cmd = nullptr;
};

bool flag_on(const std::string& value, const char* flag) {
  if (value == "on") return true;
  if (value == "off") return false;
  throw mctrack::ConfigError(std::string(flag) + " must be on or off");
}

int run_simgen(const SimgenArgs& args) {
  mctrack::ScenarioParams params;
  if (!args.config.empty()) {
    params = mctrack::load_scenario_params(args.config);
  }
  const CLI::App& cmd = *args.cmd;
  if (cmd.count("--cameras")) params.cameras = args.params.cameras;
  if (cmd.count("--vehicles")) params.vehicles = args.params.vehicles;
  if (cmd.count("--frames")) params.frames = args.params.frames;
  if (cmd.count("--noise-std")) params.noise_std = args.params.noise_std;
  if (cmd.count("--miss-rate")) params.miss_rate = args.params.miss_rate;
  if (cmd.count("--spurious-rate")) {
    params.spurious_rate = args.params.spurious_rate;
  }
  if (cmd.count("--parked")) {
    params.parked_vehicles = args.params.parked_vehicles;
  }
  if (cmd.count("--clutter")) params.roi_clutter = args.params.roi_clutter;
  if (cmd.count("--feature-dim")) params.feature_dim = args.params.feature_dim;
  if (cmd.count("--spread")) {
    params.cluster_spread = args.params.cluster_spread;
  }
  if (cmd.count("--separation")) {
    params.cluster_separation = args.params.cluster_separation;
  }
  if (cmd.count("--seed")) params.seed = args.params.seed;
  mctrack::write_scenario(args.out, params);
  return 0;
}

int run_track_cmd(const TrackArgs& args) {
  mctrack::PipelineConfig cfg = mctrack::load_pipeline_config(args.config);
  if (!args.tracker.empty()) {
    cfg.tracker = mctrack::parse_tracker_choice(args.tracker);
  }
  if (!args.roi_filter.empty()) {
    cfg.roi.enabled = flag_on(args.roi_filter, "--roi-filter");
  }
  if (!args.variance_filter.empty()) {
    cfg.variance_enabled = flag_on(args.variance_filter, "--variance-filter");
  }
  if (args.cmd->count("--seed")) cfg.seed = args.seed;
  const auto results = mctrack::run_track(cfg, args.out);
  for (const mctrack::CameraTrackResult& r : results) {
    if (r.missing_feature_warnings > 0) {
      std::cerr << "warning: camera " << r.name << ": "
                << r.missing_feature_warnings
                << " associations fell back to motion-only cost (missing "
                   "appearance features)\n";
    }
  }
  return 0;
}

int run_train_cmd(const TrainArgs& args) {
  mctrack::PipelineConfig cfg = mctrack::load_pipeline_config(args.config);
  if (args.cmd->count("--seed")) cfg.train.seed = args.seed;
  mctrack::run_train(cfg, args.out, args.loss_out);
  return 0;
}

int run_reid_cmd(const ReidArgs& args) {
  mctrack::PipelineConfig cfg = mctrack::load_pipeline_config(args.config);
  if (args.cmd->count("--max-dist")) cfg.reid.max_dist = args.max_dist;
  mctrack::run_reid(cfg, args.model, args.tracks, args.out);
  return 0;
}

int run_eval_cmd(const EvalArgs& args) {
  mctrack::PipelineConfig cfg = mctrack::load_pipeline_config(args.config);
  std::vector<mctrack::SequenceReport> sequences;
  if (args.mode == "sct") {
    if (args.tracks.empty()) {
      throw mctrack::ConfigError("eval --mode sct needs --tracks");
    }
    sequences = mctrack::run_eval_sct(cfg, args.tracks, args.out);
  } else if (args.mode == "mtmc") {
    if (args.pred.empty()) {
      throw mctrack::ConfigError("eval --mode mtmc needs --pred");
    }
    sequences = mctrack::run_eval_mtmc(cfg, args.pred, args.out);
  } else {
    throw mctrack::ConfigError("eval mode must be sct or mtmc");
  }
  std::cout << mctrack::format_report_table(sequences);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Multi-camera vehicle tracking: per-camera tracking, appearance "
      "metric training, cross-camera re-identification, and evaluation."};
  app.require_subcommand(1);

  SimgenArgs simgen;
  simgen.cmd = app.add_subcommand(
      "simgen", "Generate a synthetic multi-camera scenario");
  simgen.cmd->add_option("--config", simgen.config,
                         "Scenario parameter JSON (flags win)");
  simgen.cmd->add_option("--out", simgen.out, "Scenario output folder")
      ->required();
  simgen.cmd->add_option("--cameras", simgen.params.cameras, "Camera count");
  simgen.cmd->add_option("--vehicles", simgen.params.vehicles,
                         "Moving vehicle count");
  simgen.cmd->add_option("--frames", simgen.params.frames, "Frames per camera");
  simgen.cmd->add_option("--noise-std", simgen.params.noise_std,
                         "Detection center noise std (px)");
  simgen.cmd->add_option("--miss-rate", simgen.params.miss_rate,
                         "Missed-detection probability");
  simgen.cmd->add_option("--spurious-rate", simgen.params.spurious_rate,
                         "Spurious-detection probability per frame");
  simgen.cmd->add_option("--parked", simgen.params.parked_vehicles,
                         "Parked (zero-velocity) vehicles per camera");
  simgen.cmd->add_option("--clutter", simgen.params.roi_clutter,
                         "Moving objects outside the RoI per camera");
  simgen.cmd->add_option("--feature-dim", simgen.params.feature_dim,
                         "Synthetic feature dimension");
  simgen.cmd->add_option("--spread", simgen.params.cluster_spread,
                         "Within-identity feature spread");
  simgen.cmd->add_option("--separation", simgen.params.cluster_separation,
                         "Minimum between-identity center distance");
  simgen.cmd->add_option("--seed", simgen.params.seed, "Generator seed");

  TrackArgs track;
  track.cmd = app.add_subcommand("track", "Run per-camera tracking");
  track.cmd->add_option("--config", track.config, "Pipeline config JSON")
      ->required();
  track.cmd->add_option("--out", track.out, "Track output folder")->required();
  track.cmd->add_option("--tracker", track.tracker,
                        "max-overlap | sort | deepsort (overrides config)");
  track.cmd->add_option("--roi-filter", track.roi_filter,
                        "on | off (overrides config)");
  track.cmd->add_option("--variance-filter", track.variance_filter,
                        "on | off (overrides config)");
  track.cmd->add_option("--seed", track.seed, "Seed override");

  TrainArgs train;
  train.cmd =
      app.add_subcommand("train", "Train the appearance embedding model");
  train.cmd->add_option("--config", train.config, "Pipeline config JSON")
      ->required();
  train.cmd->add_option("--out", train.out, "Checkpoint output path")
      ->required();
  train.cmd->add_option("--loss-out", train.loss_out,
                        "Optional per-epoch loss CSV");
  train.cmd->add_option("--seed", train.seed, "Training seed override");

  ReidArgs reid;
  reid.cmd =
      app.add_subcommand("reid", "Merge per-camera tracks into global ids");
  reid.cmd->add_option("--config", reid.config, "Pipeline config JSON")
      ->required();
  reid.cmd->add_option("--model", reid.model, "Model checkpoint")->required();
  reid.cmd->add_option("--tracks", reid.tracks, "Track output folder")
      ->required();
  reid.cmd->add_option("--out", reid.out, "Cross-camera output file")
      ->required();
  reid.cmd->add_option("--max-dist", reid.max_dist,
                       "Match threshold override");
  reid.cmd->add_option("--seed", reid.seed, "Unused; accepted for symmetry");

  EvalArgs eval;
  eval.cmd = app.add_subcommand("eval", "Score tracks against ground truth");
  eval.cmd->add_option("--config", eval.config, "Pipeline config JSON")
      ->required();
  eval.cmd->add_option("--mode", eval.mode, "sct | mtmc")->required();
  eval.cmd->add_option("--tracks", eval.tracks,
                       "Track output folder (sct mode)");
  eval.cmd->add_option("--pred", eval.pred,
                       "Cross-camera output file (mtmc mode)");
  eval.cmd->add_option("--out", eval.out, "Report output path")->required();
  eval.cmd->add_option("--seed", eval.seed, "Unused; accepted for symmetry");

  try {
    app.parse(argc, argv);
    if (simgen.cmd->parsed()) return run_simgen(simgen);
    if (track.cmd->parsed()) return run_track_cmd(track);
    if (train.cmd->parsed()) return run_train_cmd(train);
    if (reid.cmd->parsed()) return run_reid_cmd(reid);
    if (eval.cmd->parsed()) return run_eval_cmd(eval);
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const mctrack::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const mctrack::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
