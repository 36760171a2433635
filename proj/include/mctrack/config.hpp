#pragma once

#include "mctrack/errors.hpp"
#include "mctrack/metric.hpp"
#include "mctrack/tracker.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace mctrack {

enum class TrackerChoice { kMaxOverlap, kSort, kDeepSort };

inline TrackerChoice parse_tracker_choice(const std::string& name) {
  if (name == "max-overlap") return TrackerChoice::kMaxOverlap;
  if (name == "sort") return TrackerChoice::kSort;
  if (name == "deepsort") return TrackerChoice::kDeepSort;
  throw ConfigError("unknown tracker: " + name +
                    " (expected max-overlap, sort, or deepsort)");
}

inline std::string tracker_choice_name(TrackerChoice choice) {
  switch (choice) {
    case TrackerChoice::kMaxOverlap:
      return "max-overlap";
    case TrackerChoice::kSort:
      return "sort";
    case TrackerChoice::kDeepSort:
      return "deepsort";
  }
  throw ConfigError("invalid tracker choice");
}

/// Per-camera input files; paths are relative to the config file's folder.
struct CameraInputs {
  std::string name;
  std::string detections;
  std::string features;     // sidecar for detections ("" = none)
  std::string mask;         // RoI mask ("" = none)
  std::string gt;           // SCT ground truth ("" = none)
  std::string gt_features;  // sidecar for gt ("" = none)
};

struct RoiFilterConfig {
  bool enabled = true;
  double threshold = 10.0;  // minimum centroid distance to the RoI border
};

/// Embedding model shape used by the train subcommand.
struct ModelShape {
  int embed_dim = 8;
  int hidden_dim = 0;  // 0 = single affine layer
  bool normalize = true;
};

struct ReidConfig {
  double max_dist = -1.0;  // < 0: use the checkpoint suggestion, else 1.0
  std::vector<std::string> camera_order;  // empty: config order
};

struct PipelineConfig {
  std::vector<CameraInputs> cameras;
  std::string mtmc_gt;  // cross-camera ground truth ("" = none)
  TrackerChoice tracker = TrackerChoice::kDeepSort;
  RoiFilterConfig roi;
  AssociationConfig association;
  bool variance_enabled = true;
  VarianceFilterConfig variance;
  TrainConfig train;
  ModelShape model;
  ReidConfig reid;
  std::uint64_t seed = 1;
  std::string base_dir;  // folder of the loaded config; not serialized

  /// Resolves a config-relative path ("" stays "").
  std::string resolve(const std::string& path) const {
    if (path.empty()) return path;
    const std::filesystem::path p(path);
    if (p.is_absolute() || base_dir.empty()) return path;
    return (std::filesystem::path(base_dir) / p).string();
  }
};

namespace detail {

/// Rejects unknown keys so config typos fail loudly instead of silently
/// falling back to defaults.
inline void check_keys(const nlohmann::json& obj,
                       const std::vector<std::string>& allowed,
                       const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const std::string& a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("unknown config key " + where + "." + key);
  }
}

template <typename T>
T get_or(const nlohmann::json& obj, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key " + key + " has the wrong type");
  }
}

}  // namespace detail

inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config root must be an object");
  detail::check_keys(j,
                     {"cameras", "mtmc_gt", "tracker", "roi_filter",
                      "association", "variance_filter", "train", "model",
                      "reid", "seed"},
                     "config");
  PipelineConfig cfg;
  if (j.contains("cameras")) {
    if (!j.at("cameras").is_array()) {
      throw ConfigError("config cameras must be an array");
    }
    for (const nlohmann::json& c : j.at("cameras")) {
      detail::check_keys(
          c, {"name", "detections", "features", "mask", "gt", "gt_features"},
          "cameras[]");
      CameraInputs cam;
      cam.name = detail::get_or<std::string>(c, "name", "");
      cam.detections = detail::get_or<std::string>(c, "detections", "");
      cam.features = detail::get_or<std::string>(c, "features", "");
      cam.mask = detail::get_or<std::string>(c, "mask", "");
      cam.gt = detail::get_or<std::string>(c, "gt", "");
      cam.gt_features = detail::get_or<std::string>(c, "gt_features", "");
      if (cam.name.empty()) {
        throw ConfigError("every camera needs a non-empty name");
      }
      for (const CameraInputs& prev : cfg.cameras) {
        if (prev.name == cam.name) {
          throw ConfigError("duplicate camera name: " + cam.name);
        }
      }
      cfg.cameras.push_back(std::move(cam));
    }
  }
  cfg.mtmc_gt = detail::get_or<std::string>(j, "mtmc_gt", "");
  cfg.tracker = parse_tracker_choice(
      detail::get_or<std::string>(j, "tracker", "deepsort"));
  if (j.contains("roi_filter")) {
    const nlohmann::json& r = j.at("roi_filter");
    detail::check_keys(r, {"enabled", "threshold"}, "roi_filter");
    cfg.roi.enabled = detail::get_or<bool>(r, "enabled", cfg.roi.enabled);
    cfg.roi.threshold =
        detail::get_or<double>(r, "threshold", cfg.roi.threshold);
    if (cfg.roi.threshold < 0.0) {
      throw ConfigError("roi_filter.threshold must be >= 0");
    }
  }
  if (j.contains("association")) {
    const nlohmann::json& a = j.at("association");
    detail::check_keys(a,
                       {"iou_gate", "appearance_weight", "max_age", "min_hits",
                        "gallery_size"},
                       "association");
    cfg.association.iou_gate =
        detail::get_or<double>(a, "iou_gate", cfg.association.iou_gate);
    cfg.association.appearance_weight = detail::get_or<double>(
        a, "appearance_weight", cfg.association.appearance_weight);
    cfg.association.max_age =
        detail::get_or<int>(a, "max_age", cfg.association.max_age);
    cfg.association.min_hits =
        detail::get_or<int>(a, "min_hits", cfg.association.min_hits);
    cfg.association.gallery_size =
        detail::get_or<int>(a, "gallery_size", cfg.association.gallery_size);
  }
  if (j.contains("variance_filter")) {
    const nlohmann::json& v = j.at("variance_filter");
    detail::check_keys(v, {"enabled", "threshold", "min_track_length",
                           "online"},
                       "variance_filter");
    cfg.variance_enabled = detail::get_or<bool>(v, "enabled", true);
    cfg.variance.variance_threshold =
        detail::get_or<double>(v, "threshold", cfg.variance.variance_threshold);
    cfg.variance.min_track_length = detail::get_or<int>(
        v, "min_track_length", cfg.variance.min_track_length);
    cfg.variance.online = detail::get_or<bool>(v, "online", false);
  }
  if (j.contains("train")) {
    const nlohmann::json& t = j.at("train");
    detail::check_keys(t,
                       {"margin", "learning_rate", "batch_size", "epochs",
                        "seed", "mining"},
                       "train");
    cfg.train.margin = detail::get_or<double>(t, "margin", cfg.train.margin);
    cfg.train.learning_rate =
        detail::get_or<double>(t, "learning_rate", cfg.train.learning_rate);
    cfg.train.batch_size =
        detail::get_or<int>(t, "batch_size", cfg.train.batch_size);
    cfg.train.epochs = detail::get_or<int>(t, "epochs", cfg.train.epochs);
    cfg.train.seed = detail::get_or<std::uint64_t>(t, "seed", cfg.train.seed);
    cfg.train.mining = parse_mining_strategy(
        detail::get_or<std::string>(t, "mining", "random"));
  }
  if (j.contains("model")) {
    const nlohmann::json& m = j.at("model");
    detail::check_keys(m, {"embed_dim", "hidden_dim", "normalize"}, "model");
    cfg.model.embed_dim =
        detail::get_or<int>(m, "embed_dim", cfg.model.embed_dim);
    cfg.model.hidden_dim =
        detail::get_or<int>(m, "hidden_dim", cfg.model.hidden_dim);
    cfg.model.normalize =
        detail::get_or<bool>(m, "normalize", cfg.model.normalize);
  }
  if (j.contains("reid")) {
    const nlohmann::json& r = j.at("reid");
    detail::check_keys(r, {"max_dist", "camera_order"}, "reid");
    cfg.reid.max_dist =
        detail::get_or<double>(r, "max_dist", cfg.reid.max_dist);
    cfg.reid.camera_order = detail::get_or<std::vector<std::string>>(
        r, "camera_order", cfg.reid.camera_order);
  }
  cfg.seed = detail::get_or<std::uint64_t>(j, "seed", cfg.seed);
  return cfg;
}

inline nlohmann::json pipeline_config_to_json(const PipelineConfig& cfg) {
  nlohmann::json j;
  j["cameras"] = nlohmann::json::array();
  for (const CameraInputs& cam : cfg.cameras) {
    nlohmann::json c;
    c["name"] = cam.name;
    c["detections"] = cam.detections;
    if (!cam.features.empty()) c["features"] = cam.features;
    if (!cam.mask.empty()) c["mask"] = cam.mask;
    if (!cam.gt.empty()) c["gt"] = cam.gt;
    if (!cam.gt_features.empty()) c["gt_features"] = cam.gt_features;
    j["cameras"].push_back(std::move(c));
  }
  if (!cfg.mtmc_gt.empty()) j["mtmc_gt"] = cfg.mtmc_gt;
  j["tracker"] = tracker_choice_name(cfg.tracker);
  j["roi_filter"] = {{"enabled", cfg.roi.enabled},
                     {"threshold", cfg.roi.threshold}};
  j["association"] = {{"iou_gate", cfg.association.iou_gate},
                      {"appearance_weight", cfg.association.appearance_weight},
                      {"max_age", cfg.association.max_age},
                      {"min_hits", cfg.association.min_hits},
                      {"gallery_size", cfg.association.gallery_size}};
  j["variance_filter"] = {{"enabled", cfg.variance_enabled},
                          {"threshold", cfg.variance.variance_threshold},
                          {"min_track_length", cfg.variance.min_track_length},
                          {"online", cfg.variance.online}};
  j["train"] = {{"margin", cfg.train.margin},
                {"learning_rate", cfg.train.learning_rate},
                {"batch_size", cfg.train.batch_size},
                {"epochs", cfg.train.epochs},
                {"seed", cfg.train.seed},
                {"mining", cfg.train.mining == MiningStrategy::kBatchHard
                               ? "batch-hard"
                               : "random"}};
  j["model"] = {{"embed_dim", cfg.model.embed_dim},
                {"hidden_dim", cfg.model.hidden_dim},
                {"normalize", cfg.model.normalize}};
  nlohmann::json reid;
  reid["max_dist"] = cfg.reid.max_dist;
  if (!cfg.reid.camera_order.empty()) {
    reid["camera_order"] = cfg.reid.camera_order;
  }
  j["reid"] = std::move(reid);
  j["seed"] = cfg.seed;
  return j;
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  PipelineConfig cfg = pipeline_config_from_json(j);
  cfg.base_dir = std::filesystem::path(path).parent_path().string();
  return cfg;
}

inline void save_pipeline_config(const std::string& path,
                                 const PipelineConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open config for writing: " + path);
  out << pipeline_config_to_json(cfg).dump(2) << "\n";
  if (!out) throw DataError("failed writing config: " + path);
}

}  // namespace mctrack
