#pragma once

#include "mctrack/assignment.hpp"
#include "mctrack/geometry.hpp"
#include "mctrack/kalman.hpp"

#include <algorithm>
#include <deque>
#include <optional>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace mctrack {

struct AssociationConfig {
  double iou_gate = 0.5;
  double appearance_weight = 0.5;  // lambda of the weighted motion+appearance sum
  int max_age = 1;
  int min_hits = 3;
  int gallery_size = 100;
  KalmanNoiseConfig noise;
};

struct VarianceFilterConfig {
  double variance_threshold = 100.0;  // pixels^2
  int min_track_length = 5;
  bool online = false;
};

/// One emitted tracker row: the box reported for `track_id` at `frame`,
/// carrying the matched detection's appearance feature when it had one.
struct TrackOutput {
  int frame = 0;
  int track_id = 0;
  BoundingBox box;
  double confidence = 1.0;
  std::optional<FeatureVector> feature;
};

inline double cosine_distance(const Eigen::VectorXd& a,
                              const Eigen::VectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na < 1e-12 || nb < 1e-12) return 1.0;
  return 1.0 - a.dot(b) / (na * nb);
}

// ---------------------------------------------------------------------------
// Maximum-overlap baseline
// ---------------------------------------------------------------------------

struct MaxOverlapStep {
  std::vector<Track> updated;  // the input tracks, some extended
  std::vector<Track> created;  // fresh tracks for unmatched detections
};

/// Greedily appends the frame's detections to the live tracks in descending
/// IoU order against each track's last box (ties: lowest track id, then
/// lowest detection index). A detection overlapping no track at `iou_gate`
/// or better opens a new track.
inline MaxOverlapStep max_overlap_step(const std::vector<Track>& live_tracks,
                                       const std::vector<Detection>& dets,
                                       double iou_gate, int& next_track_id,
                                       int camera_id = 0) {
  if (!dets.empty()) {
    const int frame = dets.front().frame;
    for (const Detection& d : dets) {
      if (d.frame != frame) {
        throw std::invalid_argument(
            "max_overlap_step: detections span multiple frames");
      }
    }
    for (const Track& t : live_tracks) {
      if (!t.empty() && t.last_frame() >= frame) {
        throw std::invalid_argument(
            "max_overlap_step: frame not after live tracks");
      }
    }
  }

  MaxOverlapStep step;
  step.updated = live_tracks;

  struct Candidate {
    double overlap;
    int track_id;
    int track_index;
    int det_index;
  };
  std::vector<Candidate> candidates;
  for (std::size_t ti = 0; ti < live_tracks.size(); ++ti) {
    for (std::size_t di = 0; di < dets.size(); ++di) {
      const double o = iou(live_tracks[ti].last_box(), dets[di].box);
      if (o >= iou_gate) {
        candidates.push_back({o, live_tracks[ti].track_id,
                              static_cast<int>(ti), static_cast<int>(di)});
      }
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.overlap != b.overlap) return a.overlap > b.overlap;
              if (a.track_id != b.track_id) return a.track_id < b.track_id;
              return a.det_index < b.det_index;
            });

  std::vector<char> track_used(live_tracks.size(), 0);
  std::vector<char> det_used(dets.size(), 0);
  for (const Candidate& c : candidates) {
    if (track_used[c.track_index] || det_used[c.det_index]) continue;
    track_used[c.track_index] = 1;
    det_used[c.det_index] = 1;
    append_detection(step.updated[c.track_index], dets[c.det_index]);
  }
  for (std::size_t di = 0; di < dets.size(); ++di) {
    if (det_used[di]) continue;
    Track t;
    t.camera_id = camera_id;
    t.track_id = next_track_id++;
    t.detections.push_back(dets[di]);
    step.created.push_back(std::move(t));
  }
  return step;
}

/// Streaming wrapper around max_overlap_step. A track stays matchable while
/// its last detection is at most `max_age` frames old; every detection is
/// emitted with its assigned id.
class MaxOverlapTracker {
 public:
  MaxOverlapTracker(double iou_gate, int max_age, int camera_id = 0)
      : iou_gate_(iou_gate), max_age_(max_age), camera_id_(camera_id) {}

  std::vector<TrackOutput> step(int frame, const std::vector<Detection>& dets) {
    if (last_frame_ >= 0 && frame <= last_frame_) {
      throw std::invalid_argument("max overlap: out-of-order frame");
    }
    last_frame_ = frame;

    std::vector<Track> live;
    std::vector<std::size_t> live_index;
    for (std::size_t i = 0; i < tracks_.size(); ++i) {
      if (frame - tracks_[i].last_frame() <= max_age_) {
        live.push_back(tracks_[i]);
        live_index.push_back(i);
      }
    }
    MaxOverlapStep s =
        max_overlap_step(live, dets, iou_gate_, next_id_, camera_id_);
    for (std::size_t i = 0; i < live_index.size(); ++i) {
      tracks_[live_index[i]] = std::move(s.updated[i]);
    }
    for (Track& t : s.created) tracks_.push_back(std::move(t));

    std::vector<TrackOutput> out;
    for (const Track& t : tracks_) {
      if (!t.empty() && t.last_frame() == frame) {
        out.push_back(TrackOutput{frame, t.track_id, t.last_box(),
                                  t.detections.back().confidence,
                                  t.detections.back().feature});
      }
    }
    std::sort(out.begin(), out.end(),
              [](const TrackOutput& a, const TrackOutput& b) {
                return a.track_id < b.track_id;
              });
    return out;
  }

  const std::vector<Track>& all_tracks() const { return tracks_; }

 private:
  double iou_gate_;
  int max_age_;
  int camera_id_;
  int next_id_ = 1;
  int last_frame_ = -1;
  std::vector<Track> tracks_;
};

// ---------------------------------------------------------------------------
// Weighted motion + appearance association cost
// ---------------------------------------------------------------------------

struct AppearanceCost {
  double cost = 0.0;
  bool used_appearance = false;
};

/// cost = lambda * (1 - iou(predicted, det)) + (1 - lambda) * d_app, where
/// d_app is the minimum cosine distance between the detection embedding and
/// the track's gallery. With no usable features the motion term alone is
/// returned (lambda = 1 fallback) and used_appearance stays false.
inline AppearanceCost deep_association_cost(
    const BoundingBox& predicted_box,
    const std::deque<FeatureVector>& gallery, const Detection& det,
    double lambda) {
  const double motion = 1.0 - iou(predicted_box, det.box);
  if (!det.feature.has_value() || gallery.empty()) {
    return {motion, false};
  }
  double d_app = std::numeric_limits<double>::infinity();
  for (const FeatureVector& g : gallery) {
    d_app = std::min(d_app, cosine_distance(*det.feature, g));
  }
  return {lambda * motion + (1.0 - lambda) * d_app, true};
}

// ---------------------------------------------------------------------------
// SORT-style tracker with an optional appearance term
// ---------------------------------------------------------------------------

class SortTracker {
 public:
  enum class Variant {
    kSort,      // motion-only cost; a track re-earns min_hits after any miss
    kDeepSort,  // weighted motion+appearance cost; confirmation is permanent
  };

  SortTracker(const AssociationConfig& cfg, Variant variant, int camera_id = 0)
      : cfg_(cfg), variant_(variant), camera_id_(camera_id) {
    if (cfg.iou_gate < 0.0 || cfg.iou_gate > 1.0) {
      throw std::invalid_argument("iou_gate outside [0,1]");
    }
    if (cfg.appearance_weight < 0.0 || cfg.appearance_weight > 1.0) {
      throw std::invalid_argument("appearance_weight outside [0,1]");
    }
    if (cfg.max_age < 1) throw std::invalid_argument("max_age must be >= 1");
  }

  /// Processes one frame worth of detections. Frames must arrive in strictly
  /// increasing order; each call is one prediction tick.
  std::vector<TrackOutput> step(int frame, const std::vector<Detection>& dets) {
    if (last_frame_ >= 0 && frame <= last_frame_) {
      throw std::invalid_argument("sort tracker: out-of-order frame");
    }
    last_frame_ = frame;
    for (const Detection& d : dets) {
      if (d.frame != frame) {
        throw std::invalid_argument("sort tracker: detection frame mismatch");
      }
    }

    // Predict. A miss on the previous frame ends the consecutive-hit streak;
    // states with collapsed scale are dropped before association.
    for (Entry& e : entries_) {
      if (e.state.time_since_update > 0) e.hit_streak = 0;
      e.state = kalman_predict(e.state, cfg_.noise);
    }
    std::erase_if(entries_, [](const Entry& e) {
      return e.state.scale_degenerate;
    });

    // Associate: motion cost gated on IoU, appearance blended in when the
    // variant and the data allow it.
    const int n = static_cast<int>(entries_.size());
    const int m = static_cast<int>(dets.size());
    Eigen::MatrixXd cost(n, m);
    for (int i = 0; i < n; ++i) {
      const BoundingBox predicted = state_box(entries_[i].state);
      for (int j = 0; j < m; ++j) {
        if (iou(predicted, dets[j].box) < cfg_.iou_gate) {
          cost(i, j) = kForbidden;
          continue;
        }
        if (variant_ == Variant::kDeepSort && cfg_.appearance_weight < 1.0) {
          const AppearanceCost ac = deep_association_cost(
              predicted, entries_[i].gallery, dets[j], cfg_.appearance_weight);
          if (!ac.used_appearance) ++missing_feature_warnings_;
          cost(i, j) = ac.cost;
        } else {
          cost(i, j) = 1.0 - iou(predicted, dets[j].box);
        }
      }
    }
    const Assignment assignment = hungarian(cost);

    std::vector<char> det_matched(dets.size(), 0);
    std::vector<TrackOutput> out;
    for (const auto& [ti, di] : assignment.pairs) {
      Entry& e = entries_[ti];
      e.state = kalman_update(e.state, dets[di].box, cfg_.noise);
      e.hit_streak += 1;
      if (e.hit_streak >= cfg_.min_hits) e.confirmed = true;
      push_feature(e, dets[di]);
      det_matched[di] = 1;
      if (emit(e)) {
        out.push_back(TrackOutput{frame, e.id, state_box(e.state),
                                  dets[di].confidence, dets[di].feature});
      }
    }
    for (std::size_t di = 0; di < dets.size(); ++di) {
      if (det_matched[di]) continue;
      Entry e;
      e.state = kalman_init(dets[di].box, cfg_.noise);
      e.id = next_id_++;
      e.hit_streak = 1;
      if (e.hit_streak >= cfg_.min_hits) e.confirmed = true;
      push_feature(e, dets[di]);
      if (emit(e)) {
        out.push_back(TrackOutput{frame, e.id, state_box(e.state),
                                  dets[di].confidence, dets[di].feature});
      }
      entries_.push_back(std::move(e));
    }

    std::erase_if(entries_, [this](const Entry& e) {
      if (e.state.time_since_update > cfg_.max_age) return true;
      // DeepSORT deletes tentative tracks on their first miss.
      if (variant_ == Variant::kDeepSort && !e.confirmed &&
          e.state.time_since_update > 0) {
        return true;
      }
      return false;
    });

    std::sort(out.begin(), out.end(),
              [](const TrackOutput& a, const TrackOutput& b) {
                return a.track_id < b.track_id;
              });
    return out;
  }

  int missing_feature_warnings() const { return missing_feature_warnings_; }
  std::size_t live_count() const { return entries_.size(); }
  int camera_id() const { return camera_id_; }

 private:
  struct Entry {
    KalmanTrackState state;
    int id = 0;
    int hit_streak = 0;
    bool confirmed = false;
    std::deque<FeatureVector> gallery;
  };

  bool emit(const Entry& e) const {
    if (e.state.time_since_update != 0) return false;
    if (variant_ == Variant::kDeepSort) return e.confirmed;
    return e.hit_streak >= cfg_.min_hits;
  }

  void push_feature(Entry& e, const Detection& det) {
    if (variant_ != Variant::kDeepSort || !det.feature.has_value()) return;
    e.gallery.push_back(*det.feature);
    while (static_cast<int>(e.gallery.size()) > cfg_.gallery_size) {
      e.gallery.pop_front();
    }
  }

  AssociationConfig cfg_;
  Variant variant_;
  int camera_id_;
  int next_id_ = 1;
  int last_frame_ = -1;
  int missing_feature_warnings_ = 0;
  std::vector<Entry> entries_;
};

// ---------------------------------------------------------------------------
// Variance filtering
// ---------------------------------------------------------------------------

/// Removes tracks whose centroid variance falls below the threshold once
/// they are at least `min_track_length` detections long. Intended as a
/// post-processing pass over completed tracks; idempotent.
inline std::vector<Track> variance_filter(const std::vector<Track>& tracks,
                                          const VarianceFilterConfig& cfg) {
  std::vector<Track> kept;
  kept.reserve(tracks.size());
  for (const Track& t : tracks) {
    const bool stationary =
        static_cast<int>(t.detections.size()) >= cfg.min_track_length &&
        centroid_variance(t) < cfg.variance_threshold;
    if (!stationary) kept.push_back(t);
  }
  return kept;
}

}  // namespace mctrack
