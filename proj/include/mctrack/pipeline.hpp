#pragma once

#include "mctrack/config.hpp"
#include "mctrack/errors.hpp"
#include "mctrack/eval.hpp"
#include "mctrack/io.hpp"
#include "mctrack/metric.hpp"
#include "mctrack/mtmc.hpp"
#include "mctrack/roi.hpp"
#include "mctrack/tracker.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mctrack {

namespace detail {

inline void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) {
    throw ConfigError("config is missing the " + what + " path");
  }
  if (!std::filesystem::exists(path)) {
    throw ConfigError(what + " does not exist: " + path);
  }
}

/// Groups feature-carrying detection rows into per-id tracks.
inline std::vector<Track> tracks_with_features(
    const std::vector<MotRow>& rows, const std::vector<Detection>& dets,
    int camera_id) {
  std::map<int, Track> by_id;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Track& t = by_id[rows[i].id];
    t.camera_id = camera_id;
    t.track_id = rows[i].id;
    t.detections.push_back(dets[i]);
  }
  std::vector<Track> tracks;
  tracks.reserve(by_id.size());
  for (auto& [id, t] : by_id) {
    std::sort(t.detections.begin(), t.detections.end(),
              [](const Detection& a, const Detection& b) {
                return a.frame < b.frame;
              });
    tracks.push_back(std::move(t));
  }
  return tracks;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// track: RoI filter -> tracker -> variance filter, one camera at a time
// ---------------------------------------------------------------------------

struct CameraTrackResult {
  std::string name;
  int camera_id = 0;
  std::vector<MotRow> rows;
  std::vector<FeatureRow> feature_rows;  // aligned with rows when has_features
  bool has_features = false;  // every emitted row carried a feature
  int missing_feature_warnings = 0;
};

inline CameraTrackResult run_camera_tracking(const PipelineConfig& cfg,
                                             const CameraInputs& cam,
                                             int camera_id) {
  CameraTrackResult result;
  result.name = cam.name;
  result.camera_id = camera_id;

  const std::string det_path = cfg.resolve(cam.detections);
  detail::require_file(det_path, "detections file for camera " + cam.name);
  const std::vector<MotRow> raw_rows = read_mot_file(det_path);
  std::vector<Detection> dets;
  if (!cam.features.empty()) {
    const std::string feat_path = cfg.resolve(cam.features);
    detail::require_file(feat_path, "feature file for camera " + cam.name);
    dets = attach_features(raw_rows, read_feature_file(feat_path), det_path);
  } else {
    dets = detections_from_rows(raw_rows);
  }

  // Stage 1: region-of-interest filtering, strictly before association.
  if (cfg.roi.enabled) {
    const std::string mask_path = cfg.resolve(cam.mask);
    detail::require_file(mask_path, "RoI mask for camera " + cam.name);
    const RoiMask mask = read_roi_mask(mask_path);
    dets = filter_by_roi(dets, mask, cfg.roi.threshold);
  }

  std::map<int, std::vector<Detection>> by_frame;
  for (const Detection& d : dets) by_frame[d.frame].push_back(d);
  const int last_frame = by_frame.empty() ? -1 : by_frame.rbegin()->first;

  // Stage 2: tracking.
  std::vector<TrackOutput> outputs;
  const std::vector<Detection> no_dets;
  auto drain = [&outputs](std::vector<TrackOutput> frame_outputs) {
    for (TrackOutput& o : frame_outputs) outputs.push_back(std::move(o));
  };
  if (cfg.tracker == TrackerChoice::kMaxOverlap) {
    MaxOverlapTracker tracker(cfg.association.iou_gate, cfg.association.max_age,
                              camera_id);
    for (int frame = 0; frame <= last_frame; ++frame) {
      const auto it = by_frame.find(frame);
      drain(tracker.step(frame, it == by_frame.end() ? no_dets : it->second));
    }
  } else {
    SortTracker tracker(cfg.association,
                        cfg.tracker == TrackerChoice::kSort
                            ? SortTracker::Variant::kSort
                            : SortTracker::Variant::kDeepSort,
                        camera_id);
    for (int frame = 0; frame <= last_frame; ++frame) {
      const auto it = by_frame.find(frame);
      drain(tracker.step(frame, it == by_frame.end() ? no_dets : it->second));
    }
    result.missing_feature_warnings = tracker.missing_feature_warnings();
  }

  // Stage 3: variance filtering, strictly after association. The online
  // flag stops a track's emissions once its centroid variance proves it
  // stationary; the post pass then removes such tracks outright.
  if (cfg.variance_enabled && cfg.variance.online) {
    std::map<int, std::vector<Point>> centroids;
    std::map<int, bool> banned;
    std::vector<TrackOutput> kept;
    for (const TrackOutput& o : outputs) {
      if (banned[o.track_id]) continue;
      kept.push_back(o);
      std::vector<Point>& pts = centroids[o.track_id];
      pts.push_back(centroid(o.box));
      if (static_cast<int>(pts.size()) >= cfg.variance.min_track_length) {
        double mx = 0.0, my = 0.0;
        for (const Point& p : pts) {
          mx += p.x;
          my += p.y;
        }
        mx /= static_cast<double>(pts.size());
        my /= static_cast<double>(pts.size());
        double vx = 0.0, vy = 0.0;
        for (const Point& p : pts) {
          vx += (p.x - mx) * (p.x - mx);
          vy += (p.y - my) * (p.y - my);
        }
        const double n1 = static_cast<double>(pts.size() - 1);
        if (0.5 * (vx + vy) / n1 < cfg.variance.variance_threshold) {
          banned[o.track_id] = true;
        }
      }
    }
    outputs = std::move(kept);
  }
  if (cfg.variance_enabled) {
    std::map<int, Track> by_id;
    for (const TrackOutput& o : outputs) {
      Track& t = by_id[o.track_id];
      t.camera_id = camera_id;
      t.track_id = o.track_id;
      t.detections.push_back(Detection{o.frame, o.box, o.confidence,
                                       o.feature});
    }
    std::vector<Track> tracks;
    for (auto& [id, t] : by_id) tracks.push_back(std::move(t));
    tracks = variance_filter(tracks, cfg.variance);
    std::vector<TrackOutput> kept;
    for (const Track& t : tracks) {
      for (const Detection& d : t.detections) {
        kept.push_back(
            TrackOutput{d.frame, t.track_id, d.box, d.confidence, d.feature});
      }
    }
    outputs = std::move(kept);
  }

  std::sort(outputs.begin(), outputs.end(),
            [](const TrackOutput& a, const TrackOutput& b) {
              if (a.frame != b.frame) return a.frame < b.frame;
              return a.track_id < b.track_id;
            });
  result.has_features = !cam.features.empty();
  for (const TrackOutput& o : outputs) {
    result.rows.push_back(
        MotRow{o.frame, o.track_id, o.box, o.confidence, -1, -1.0});
    if (!o.feature.has_value()) result.has_features = false;
  }
  if (result.has_features) {
    for (const TrackOutput& o : outputs) {
      result.feature_rows.push_back(
          FeatureRow{camera_id, o.frame, o.track_id, *o.feature});
    }
  }
  return result;
}

/// Output file names for one camera inside a track-output folder.
inline std::string track_file_name(const std::string& camera_name) {
  return camera_name + ".txt";
}
inline std::string track_feature_file_name(const std::string& camera_name) {
  return camera_name + "_features.csv";
}

inline std::vector<CameraTrackResult> run_track(const PipelineConfig& cfg,
                                                const std::string& out_dir) {
  if (cfg.cameras.empty()) throw ConfigError("config lists no cameras");
  std::filesystem::create_directories(out_dir);
  std::vector<CameraTrackResult> results;
  for (std::size_t i = 0; i < cfg.cameras.size(); ++i) {
    CameraTrackResult r =
        run_camera_tracking(cfg, cfg.cameras[i], static_cast<int>(i) + 1);
    const std::filesystem::path dir(out_dir);
    write_mot_file((dir / track_file_name(r.name)).string(), r.rows);
    if (r.has_features) {
      write_feature_file((dir / track_feature_file_name(r.name)).string(),
                         r.feature_rows);
    }
    results.push_back(std::move(r));
  }
  return results;
}

// ---------------------------------------------------------------------------
// train: labeled ground-truth features -> checkpoint
// ---------------------------------------------------------------------------

/// Pools every camera's ground-truth feature rows; the row id doubles as
/// the identity label.
inline std::vector<LabeledFeature> load_training_features(
    const PipelineConfig& cfg) {
  std::vector<LabeledFeature> dataset;
  for (const CameraInputs& cam : cfg.cameras) {
    if (cam.gt_features.empty()) {
      throw ConfigError("camera " + cam.name +
                        " has no gt_features path; training needs labeled "
                        "features");
    }
    const std::string path = cfg.resolve(cam.gt_features);
    detail::require_file(path, "gt feature file for camera " + cam.name);
    for (const FeatureRow& row : read_feature_file(path)) {
      dataset.push_back(LabeledFeature{row.feature, row.id});
    }
  }
  if (dataset.empty()) throw DataError("no training features found");
  return dataset;
}

struct TrainOutcome {
  ModelCheckpoint checkpoint;
  std::vector<double> loss_history;
};

inline TrainOutcome run_train(const PipelineConfig& cfg,
                              const std::string& checkpoint_path,
                              const std::string& loss_path = "") {
  const std::vector<LabeledFeature> dataset = load_training_features(cfg);
  const int input_dim = static_cast<int>(dataset.front().feature.size());
  EmbeddingModel model =
      make_embedding_model(input_dim, cfg.model.embed_dim, cfg.model.hidden_dim,
                           cfg.train.seed, cfg.model.normalize);
  FitResult fitted = fit(std::move(model), dataset, cfg.train);

  TrainOutcome outcome;
  outcome.checkpoint.model = std::move(fitted.model);
  outcome.checkpoint.suggested_max_dist =
      embedding_separation(outcome.checkpoint.model, dataset)
          .suggested_threshold();
  outcome.loss_history = std::move(fitted.loss_history);
  save_checkpoint(checkpoint_path, outcome.checkpoint);
  if (!loss_path.empty()) {
    std::ofstream out(loss_path);
    if (!out) throw DataError("cannot open loss file for writing: " + loss_path);
    out << "epoch,mean_loss\n";
    for (std::size_t e = 0; e < outcome.loss_history.size(); ++e) {
      out << e << "," << detail::format_exact(outcome.loss_history[e]) << "\n";
    }
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// reid: per-camera tracks -> global identities
// ---------------------------------------------------------------------------

/// Cameras in re-identification order: the config's reid.camera_order when
/// given (each name must exist), otherwise config order.
inline std::vector<std::size_t> reid_camera_order(const PipelineConfig& cfg) {
  std::vector<std::size_t> order;
  if (cfg.reid.camera_order.empty()) {
    for (std::size_t i = 0; i < cfg.cameras.size(); ++i) order.push_back(i);
    return order;
  }
  for (const std::string& name : cfg.reid.camera_order) {
    bool found = false;
    for (std::size_t i = 0; i < cfg.cameras.size(); ++i) {
      if (cfg.cameras[i].name == name) {
        order.push_back(i);
        found = true;
        break;
      }
    }
    if (!found) {
      throw ConfigError("reid.camera_order names unknown camera: " + name);
    }
  }
  return order;
}

inline std::vector<MtmcRow> run_reid(const PipelineConfig& cfg,
                                     const std::string& checkpoint_path,
                                     const std::string& tracks_dir,
                                     const std::string& out_path) {
  detail::require_file(checkpoint_path, "model checkpoint");
  const ModelCheckpoint checkpoint = load_checkpoint(checkpoint_path);
  double max_dist = cfg.reid.max_dist;
  if (max_dist < 0.0) {
    max_dist = checkpoint.suggested_max_dist.value_or(1.0);
  }

  std::vector<std::vector<Track>> per_camera;
  for (const std::size_t i : reid_camera_order(cfg)) {
    const CameraInputs& cam = cfg.cameras[i];
    const std::filesystem::path dir(tracks_dir);
    const std::string rows_path = (dir / track_file_name(cam.name)).string();
    const std::string feats_path =
        (dir / track_feature_file_name(cam.name)).string();
    detail::require_file(rows_path, "track file for camera " + cam.name);
    detail::require_file(feats_path,
                         "track feature file for camera " + cam.name);
    const std::vector<MotRow> rows = read_mot_file(rows_path);
    const std::vector<Detection> dets =
        attach_features(rows, read_feature_file(feats_path), rows_path);
    per_camera.push_back(
        detail::tracks_with_features(rows, dets, static_cast<int>(i) + 1));
  }

  EmbeddingModel model = checkpoint.model;
  const GlobalIdMap map = sequential_reid(per_camera, model, max_dist);
  const std::vector<MtmcRow> rows = mtmc_rows_from_tracks(per_camera, map);
  write_mtmc_file(out_path, rows);
  return rows;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

/// Per-camera reports against each camera's ground truth.
inline std::vector<SequenceReport> run_eval_sct(const PipelineConfig& cfg,
                                                const std::string& tracks_dir,
                                                const std::string& out_path) {
  std::vector<SequenceReport> sequences;
  for (std::size_t i = 0; i < cfg.cameras.size(); ++i) {
    const CameraInputs& cam = cfg.cameras[i];
    const std::string gt_path = cfg.resolve(cam.gt);
    detail::require_file(gt_path, "ground truth for camera " + cam.name);
    const std::string pred_path =
        (std::filesystem::path(tracks_dir) / track_file_name(cam.name))
            .string();
    detail::require_file(pred_path, "track file for camera " + cam.name);
    const int camera_id = static_cast<int>(i) + 1;
    const std::vector<Track> gt =
        tracks_from_rows(read_mot_file(gt_path), camera_id, gt_path);
    const std::vector<Track> pred =
        tracks_from_rows(read_mot_file(pred_path), camera_id, pred_path);
    sequences.push_back({cam.name, id_measures(gt, pred)});
  }
  write_report_file(out_path, sequences);
  return sequences;
}

/// One overall report: identity matching spans all cameras.
inline std::vector<SequenceReport> run_eval_mtmc(const PipelineConfig& cfg,
                                                 const std::string& pred_path,
                                                 const std::string& out_path) {
  const std::string gt_path = cfg.resolve(cfg.mtmc_gt);
  detail::require_file(gt_path, "cross-camera ground truth");
  detail::require_file(pred_path, "cross-camera prediction file");
  const std::vector<Track> gt = tracks_from_mtmc_rows(read_mtmc_file(gt_path));
  const std::vector<Track> pred =
      tracks_from_mtmc_rows(read_mtmc_file(pred_path));
  std::vector<SequenceReport> sequences{{"overall", id_measures(gt, pred)}};
  write_report_file(out_path, sequences);
  return sequences;
}

}  // namespace mctrack
