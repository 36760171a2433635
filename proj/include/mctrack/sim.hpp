#pragma once

#include "mctrack/config.hpp"
#include "mctrack/errors.hpp"
#include "mctrack/geometry.hpp"
#include "mctrack/io.hpp"
#include "mctrack/random.hpp"
#include "mctrack/roi.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace mctrack {

/// Multi-camera scene on a 640x480 image: vehicles drive along horizontal
/// lanes inside a rectangular RoI, optional parked cars sit still inside the
/// RoI, and optional clutter objects move through the strip outside it.
/// Every object owns a feature cluster; detections sample from it.
struct ScenarioParams {
  int cameras = 3;
  int vehicles = 10;
  int frames = 60;
  double noise_std = 1.0;      // detection center jitter, pixels
  double miss_rate = 0.05;     // per-detection drop probability
  double spurious_rate = 0.0;  // probability of one fake detection per frame
  int parked_vehicles = 0;     // stationary distractors inside the RoI
  int roi_clutter = 0;         // moving distractors outside the RoI
  int feature_dim = 16;
  double cluster_spread = 0.05;     // per-coordinate std within a cluster
  double cluster_separation = 1.0;  // minimum distance between centers
  std::uint64_t seed = 1;
};

struct CameraScenario {
  std::string name;
  GrayImage mask_image;
  std::vector<Detection> detections;  // noisy, feature-carrying, frame order
  std::vector<Track> gt_tracks;       // clean moving vehicles only
};

struct GeneratedScenario {
  ScenarioParams params;
  std::vector<CameraScenario> cameras;
  std::vector<MtmcRow> global_gt;  // vehicle identities across cameras
};

namespace detail {

constexpr int kSimWidth = 640;
constexpr int kSimHeight = 480;
constexpr int kRoiInset = 40;  // RoI = [40,600) x [40,440)

inline void validate_scenario_params(const ScenarioParams& p) {
  if (p.cameras < 1) throw ConfigError("scenario needs cameras >= 1");
  if (p.vehicles < 1) throw ConfigError("scenario needs vehicles >= 1");
  if (p.vehicles > 12) {
    throw ConfigError("vehicle count exceeds lane capacity (12)");
  }
  if (p.frames < 30) throw ConfigError("scenario needs frames >= 30");
  if (p.noise_std < 0.0) throw ConfigError("negative noise_std");
  if (p.miss_rate < 0.0 || p.miss_rate > 1.0) {
    throw ConfigError("miss_rate outside [0,1]");
  }
  if (p.spurious_rate < 0.0 || p.spurious_rate > 1.0) {
    throw ConfigError("spurious_rate outside [0,1]");
  }
  if (p.parked_vehicles < 0 || p.parked_vehicles > 8) {
    throw ConfigError("parked_vehicles outside [0,8]");
  }
  if (p.roi_clutter < 0 || p.roi_clutter > 6) {
    throw ConfigError("roi_clutter outside [0,6]");
  }
  if (p.feature_dim < 2) throw ConfigError("feature_dim must be >= 2");
  if (p.cluster_spread < 0.0) throw ConfigError("negative cluster_spread");
  if (p.cluster_separation <= 0.0) {
    throw ConfigError("cluster_separation must be > 0");
  }
}

inline GrayImage simulated_mask_image() {
  GrayImage img;
  img.width = kSimWidth;
  img.height = kSimHeight;
  img.pixels.assign(static_cast<std::size_t>(kSimWidth) * kSimHeight, 0);
  for (int y = kRoiInset; y < kSimHeight - kRoiInset; ++y) {
    for (int x = kRoiInset; x < kSimWidth - kRoiInset; ++x) {
      img.pixels[static_cast<std::size_t>(y) * kSimWidth + x] = 255;
    }
  }
  return img;
}

/// Cluster centers with guaranteed pairwise separation, via rejection
/// sampling inside a hypercube scaled to make rejections rare.
inline std::vector<Eigen::VectorXd> separated_centers(int count, int dim,
                                                      double separation,
                                                      std::mt19937_64& rng) {
  const double radius = 1.5 * separation;
  std::vector<Eigen::VectorXd> centers;
  centers.reserve(static_cast<std::size_t>(count));
  int attempts = 0;
  while (static_cast<int>(centers.size()) < count) {
    if (++attempts > 10000) {
      throw ConfigError(
          "cannot place feature clusters this far apart; lower "
          "cluster_separation or the identity count");
    }
    Eigen::VectorXd c(dim);
    for (int d = 0; d < dim; ++d) {
      c(d) = uniform_range(rng, -radius, radius);
    }
    bool ok = true;
    for (const Eigen::VectorXd& prev : centers) {
      if ((c - prev).norm() < separation) {
        ok = false;
        break;
      }
    }
    if (ok) centers.push_back(std::move(c));
  }
  return centers;
}

inline FeatureVector cluster_sample(const Eigen::VectorXd& center,
                                    double spread, std::mt19937_64& rng) {
  FeatureVector f(center.size());
  for (Eigen::Index d = 0; d < center.size(); ++d) {
    f(d) = center(d) + spread * normal_sample(rng);
  }
  return f;
}

}  // namespace detail

inline GeneratedScenario generate_scenario(const ScenarioParams& params) {
  detail::validate_scenario_params(params);
  std::mt19937_64 rng(params.seed);

  // One feature cluster per identity: vehicles are shared across cameras;
  // parked cars and clutter are per-camera objects.
  const int vehicle_clusters = params.vehicles;
  const int parked_clusters = params.cameras * params.parked_vehicles;
  const int clutter_clusters = params.cameras * params.roi_clutter;
  const std::vector<Eigen::VectorXd> centers = detail::separated_centers(
      vehicle_clusters + parked_clusters + clutter_clusters,
      params.feature_dim, params.cluster_separation, rng);
  const auto parked_center = [&](int camera, int k) -> const Eigen::VectorXd& {
    return centers[static_cast<std::size_t>(
        vehicle_clusters + camera * params.parked_vehicles + k)];
  };
  const auto clutter_center = [&](int camera, int k) -> const Eigen::VectorXd& {
    return centers[static_cast<std::size_t>(vehicle_clusters + parked_clusters +
                                            camera * params.roi_clutter + k)];
  };

  // Lane layout. Vehicle v drives left-to-right at 4-6 px/frame along its
  // own lane; parked cars sit on the bottom strip; clutter crosses the
  // top margin outside the RoI.
  const double lane_top = 100.0;
  const double lane_spacing =
      params.vehicles > 1 ? 290.0 / (params.vehicles - 1) : 0.0;
  const double vehicle_height = 24.0;
  const auto vehicle_width = [](int v) { return 36.0 + 4.0 * (v % 4); };
  const auto vehicle_speed = [](int v) { return 4.0 + 0.5 * (v % 5); };

  GeneratedScenario scenario;
  scenario.params = params;
  const GrayImage mask_image = detail::simulated_mask_image();

  for (int camera = 0; camera < params.cameras; ++camera) {
    CameraScenario cam;
    {
      char name[16];
      std::snprintf(name, sizeof(name), "c%02d", camera + 1);
      cam.name = name;
    }
    cam.mask_image = mask_image;
    const int camera_id = camera + 1;

    // Per-camera visibility windows and trajectories.
    struct VehicleMotion {
      int start = 0;
      int end = 0;  // exclusive
      double left0 = 0.0;
      double top = 0.0;
      double width = 0.0;
      double speed = 0.0;
    };
    std::vector<VehicleMotion> motion(static_cast<std::size_t>(params.vehicles));
    for (int v = 0; v < params.vehicles; ++v) {
      VehicleMotion m;
      m.width = vehicle_width(v);
      m.speed = vehicle_speed(v);
      m.start = 5 * ((v + camera) % 3);
      m.end = params.frames - 5 * ((v + 2 * camera + 1) % 3);
      // Keep the whole run inside the RoI with margin to spare.
      const int max_window =
          1 + static_cast<int>((480.0 - m.width) / m.speed);
      m.end = std::min(m.end, m.start + max_window);
      m.left0 = 80.0;
      m.top = lane_top + lane_spacing * v - vehicle_height / 2.0;
      motion[static_cast<std::size_t>(v)] = m;
    }

    std::vector<Track> gt(static_cast<std::size_t>(params.vehicles));
    for (int v = 0; v < params.vehicles; ++v) {
      gt[static_cast<std::size_t>(v)].camera_id = camera_id;
      gt[static_cast<std::size_t>(v)].track_id = v + 1;
    }

    for (int frame = 0; frame < params.frames; ++frame) {
      for (int v = 0; v < params.vehicles; ++v) {
        const VehicleMotion& m = motion[static_cast<std::size_t>(v)];
        if (frame < m.start || frame >= m.end) continue;
        const BoundingBox truth{m.left0 + m.speed * (frame - m.start), m.top,
                                m.width, vehicle_height};
        Detection clean{frame, truth, 1.0,
                        detail::cluster_sample(centers[v],
                                               params.cluster_spread, rng)};
        gt[static_cast<std::size_t>(v)].detections.push_back(clean);
        scenario.global_gt.push_back(
            MtmcRow{camera_id, v + 1, frame, truth});

        if (detail::uniform_unit(rng) < params.miss_rate) continue;
        BoundingBox noisy = truth;
        noisy.left += params.noise_std * detail::normal_sample(rng);
        noisy.top += params.noise_std * detail::normal_sample(rng);
        cam.detections.push_back(Detection{
            frame, noisy, 1.0,
            detail::cluster_sample(centers[v], params.cluster_spread, rng)});
      }
      for (int k = 0; k < params.parked_vehicles; ++k) {
        const BoundingBox truth{110.0 + 60.0 * k - 20.0, 403.0, 40.0, 24.0};
        if (detail::uniform_unit(rng) < params.miss_rate) continue;
        BoundingBox noisy = truth;
        noisy.left += params.noise_std * detail::normal_sample(rng);
        noisy.top += params.noise_std * detail::normal_sample(rng);
        cam.detections.push_back(
            Detection{frame, noisy, 1.0,
                      detail::cluster_sample(parked_center(camera, k),
                                             params.cluster_spread, rng)});
      }
      for (int k = 0; k < params.roi_clutter; ++k) {
        const double speed = 120.0 / (params.frames - 1);
        const BoundingBox truth{70.0 + 55.0 * k + speed * frame, 8.0, 40.0,
                                24.0};
        if (detail::uniform_unit(rng) < params.miss_rate) continue;
        BoundingBox noisy = truth;
        noisy.left += params.noise_std * detail::normal_sample(rng);
        noisy.top += params.noise_std * detail::normal_sample(rng);
        cam.detections.push_back(
            Detection{frame, noisy, 1.0,
                      detail::cluster_sample(clutter_center(camera, k),
                                             params.cluster_spread, rng)});
      }
      if (params.spurious_rate > 0.0 &&
          detail::uniform_unit(rng) < params.spurious_rate) {
        const double left = detail::uniform_range(rng, 60.0, 550.0);
        const double top = detail::uniform_range(rng, 60.0, 400.0);
        FeatureVector f(params.feature_dim);
        const double radius = 1.5 * params.cluster_separation;
        for (int d = 0; d < params.feature_dim; ++d) {
          f(d) = detail::uniform_range(rng, -radius, radius);
        }
        cam.detections.push_back(
            Detection{frame, BoundingBox{left, top, 30.0, 20.0}, 1.0, f});
      }
    }

    for (Track& t : gt) {
      if (!t.detections.empty()) cam.gt_tracks.push_back(std::move(t));
    }
    scenario.cameras.push_back(std::move(cam));
  }
  return scenario;
}

// ---------------------------------------------------------------------------
// On-disk emission
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<FeatureRow> feature_rows_for(
    int camera_id, const std::vector<Detection>& dets, int id_for_all) {
  std::vector<FeatureRow> rows;
  rows.reserve(dets.size());
  for (const Detection& d : dets) {
    rows.push_back(FeatureRow{camera_id, d.frame, id_for_all, *d.feature});
  }
  return rows;
}

}  // namespace detail

/// Writes the scenario in the exact formats the pipeline consumes, plus a
/// ready-to-run pipeline config (config.json) and a manifest echoing the
/// generation parameters.
inline void write_scenario(const std::string& dir,
                           const ScenarioParams& params) {
  const GeneratedScenario scenario = generate_scenario(params);
  const std::filesystem::path root(dir);
  std::filesystem::create_directories(root);

  PipelineConfig cfg;
  cfg.seed = params.seed;
  cfg.association.max_age = 30;
  cfg.association.min_hits = 1;
  // Vehicles cover up to a third of their width per frame, and a track born
  // just before a missed detection has no velocity estimate yet, so its
  // stationary prediction overlaps the reappeared box at only ~0.5.
  cfg.association.iou_gate = 0.3;
  cfg.train.epochs = 60;

  for (const CameraScenario& cam : scenario.cameras) {
    const int camera_id =
        static_cast<int>(&cam - scenario.cameras.data()) + 1;
    std::filesystem::create_directories(root / cam.name);

    std::vector<MotRow> det_rows;
    det_rows.reserve(cam.detections.size());
    std::vector<FeatureRow> det_feats;
    det_feats.reserve(cam.detections.size());
    for (const Detection& d : cam.detections) {
      det_rows.push_back(MotRow{d.frame, -1, d.box, d.confidence, -1, -1.0});
      det_feats.push_back(FeatureRow{camera_id, d.frame, -1, *d.feature});
    }
    write_mot_file((root / cam.name / "det.txt").string(), det_rows);
    write_feature_file((root / cam.name / "det_features.csv").string(),
                       det_feats);

    std::vector<MotRow> gt_rows = rows_from_tracks(cam.gt_tracks);
    write_mot_file((root / cam.name / "gt.txt").string(), gt_rows);
    std::vector<FeatureRow> gt_feats;
    for (const MotRow& r : gt_rows) {
      // rows_from_tracks orders by (frame, id); recover the detection to
      // copy its feature.
      const Track* track = nullptr;
      for (const Track& t : cam.gt_tracks) {
        if (t.track_id == r.id) {
          track = &t;
          break;
        }
      }
      for (const Detection& d : track->detections) {
        if (d.frame == r.frame) {
          gt_feats.push_back(FeatureRow{camera_id, r.frame, r.id, *d.feature});
          break;
        }
      }
    }
    write_feature_file((root / cam.name / "gt_features.csv").string(),
                       gt_feats);
    write_pgm((root / cam.name / "roi.pgm").string(), cam.mask_image);

    CameraInputs inputs;
    inputs.name = cam.name;
    inputs.detections = cam.name + "/det.txt";
    inputs.features = cam.name + "/det_features.csv";
    inputs.mask = cam.name + "/roi.pgm";
    inputs.gt = cam.name + "/gt.txt";
    inputs.gt_features = cam.name + "/gt_features.csv";
    cfg.cameras.push_back(std::move(inputs));
  }

  write_mtmc_file((root / "gt_mtmc.txt").string(), scenario.global_gt);
  cfg.mtmc_gt = "gt_mtmc.txt";
  save_pipeline_config((root / "config.json").string(), cfg);

  nlohmann::json manifest;
  manifest["scenario"] = {{"cameras", params.cameras},
                          {"vehicles", params.vehicles},
                          {"frames", params.frames},
                          {"noise_std", params.noise_std},
                          {"miss_rate", params.miss_rate},
                          {"spurious_rate", params.spurious_rate},
                          {"parked_vehicles", params.parked_vehicles},
                          {"roi_clutter", params.roi_clutter},
                          {"feature_dim", params.feature_dim},
                          {"cluster_spread", params.cluster_spread},
                          {"cluster_separation", params.cluster_separation},
                          {"seed", params.seed}};
  manifest["files"] = nlohmann::json::array();
  for (const CameraScenario& cam : scenario.cameras) {
    for (const char* f : {"det.txt", "det_features.csv", "gt.txt",
                          "gt_features.csv", "roi.pgm"}) {
      manifest["files"].push_back(cam.name + "/" + f);
    }
  }
  manifest["files"].push_back("gt_mtmc.txt");
  manifest["files"].push_back("config.json");
  std::ofstream out((root / "manifest.json").string());
  if (!out) throw DataError("cannot write scenario manifest");
  out << manifest.dump(2) << "\n";

  // Scenario params round-trip file so a scenario can be regenerated.
  nlohmann::json pj = manifest["scenario"];
  std::ofstream pout((root / "params.json").string());
  if (!pout) throw DataError("cannot write scenario params");
  pout << pj.dump(2) << "\n";
}

/// Parses a params file (the same keys simgen writes to params.json);
/// missing keys keep their defaults.
inline ScenarioParams scenario_params_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("scenario params must be an object");
  detail::check_keys(
      j,
      {"cameras", "vehicles", "frames", "noise_std", "miss_rate",
       "spurious_rate", "parked_vehicles", "roi_clutter", "feature_dim",
       "cluster_spread", "cluster_separation", "seed"},
      "params");
  ScenarioParams p;
  p.cameras = detail::get_or<int>(j, "cameras", p.cameras);
  p.vehicles = detail::get_or<int>(j, "vehicles", p.vehicles);
  p.frames = detail::get_or<int>(j, "frames", p.frames);
  p.noise_std = detail::get_or<double>(j, "noise_std", p.noise_std);
  p.miss_rate = detail::get_or<double>(j, "miss_rate", p.miss_rate);
  p.spurious_rate = detail::get_or<double>(j, "spurious_rate", p.spurious_rate);
  p.parked_vehicles =
      detail::get_or<int>(j, "parked_vehicles", p.parked_vehicles);
  p.roi_clutter = detail::get_or<int>(j, "roi_clutter", p.roi_clutter);
  p.feature_dim = detail::get_or<int>(j, "feature_dim", p.feature_dim);
  p.cluster_spread =
      detail::get_or<double>(j, "cluster_spread", p.cluster_spread);
  p.cluster_separation =
      detail::get_or<double>(j, "cluster_separation", p.cluster_separation);
  p.seed = detail::get_or<std::uint64_t>(j, "seed", p.seed);
  return p;
}

inline ScenarioParams load_scenario_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario params: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("params " + path + " is not valid JSON: " + e.what());
  }
  return scenario_params_from_json(j);
}

}  // namespace mctrack
