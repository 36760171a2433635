#pragma once

#include "mctrack/errors.hpp"
#include "mctrack/geometry.hpp"
#include "mctrack/io.hpp"
#include "mctrack/metric.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mctrack {

// ---------------------------------------------------------------------------
// Track signatures
// ---------------------------------------------------------------------------

/// Up to five embeddings sampled from a track's largest detections, plus
/// their mean as the track's summary.
struct TrackSignature {
  int camera_id = 0;
  int track_id = 0;
  std::vector<Eigen::VectorXd> embeddings;
  Eigen::VectorXd summary;
};

/// Keeps the top 30% of detections by box area (ceil, at least one), orders
/// that subset by frame, picks five equally spaced samples (all of them when
/// fewer), embeds each, and averages the embeddings into the summary.
inline TrackSignature build_signature(const Track& track,
                                      const EmbeddingModel& model) {
  if (track.empty()) {
    throw std::invalid_argument("build_signature: empty track");
  }
  std::vector<std::size_t> order(track.detections.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&track](std::size_t a, std::size_t b) {
    const double aa = track.detections[a].box.area();
    const double ab = track.detections[b].box.area();
    if (aa != ab) return aa > ab;
    return a < b;  // stable under equal areas
  });
  const std::size_t keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::ceil(0.3 * static_cast<double>(order.size()))));
  order.resize(keep);
  std::sort(order.begin(), order.end());  // back to frame order

  std::vector<std::size_t> sampled;
  if (keep <= 5) {
    sampled = order;
  } else {
    for (std::size_t k = 0; k < 5; ++k) {
      sampled.push_back(order[k * (keep - 1) / 4]);
    }
  }

  TrackSignature sig;
  sig.camera_id = track.camera_id;
  sig.track_id = track.track_id;
  for (std::size_t i : sampled) {
    const Detection& det = track.detections[i];
    if (!det.feature.has_value()) {
      throw DataError("build_signature: missing feature for camera " +
                      std::to_string(track.camera_id) + " track " +
                      std::to_string(track.track_id) + " frame " +
                      std::to_string(det.frame));
    }
    sig.embeddings.push_back(embed(model, *det.feature));
  }
  sig.summary = Eigen::VectorXd::Zero(sig.embeddings.front().size());
  for (const Eigen::VectorXd& e : sig.embeddings) sig.summary += e;
  sig.summary /= static_cast<double>(sig.embeddings.size());
  return sig;
}

/// Euclidean distance between summary embeddings.
inline double signature_distance(const TrackSignature& a,
                                 const TrackSignature& b) {
  if (a.summary.size() != b.summary.size()) {
    throw std::invalid_argument("signature_distance: dimension mismatch");
  }
  return (a.summary - b.summary).norm();
}

// ---------------------------------------------------------------------------
// Mutual-best matching
// ---------------------------------------------------------------------------

/// Pairs (i, j) where b_j is a_i's nearest signature AND a_i is b_j's
/// nearest, with distance at most max_dist. Nearest ties resolve to the
/// lowest index. The result is one-to-one and ordered by a-index.
inline std::vector<std::pair<int, int>> cross_match(
    const std::vector<TrackSignature>& set_a,
    const std::vector<TrackSignature>& set_b, double max_dist) {
  std::vector<std::pair<int, int>> pairs;
  if (set_a.empty() || set_b.empty()) return pairs;

  Eigen::MatrixXd dist(set_a.size(), set_b.size());
  for (std::size_t i = 0; i < set_a.size(); ++i) {
    for (std::size_t j = 0; j < set_b.size(); ++j) {
      dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          signature_distance(set_a[i], set_b[j]);
    }
  }
  std::vector<int> best_b(set_a.size(), 0);
  for (std::size_t i = 0; i < set_a.size(); ++i) {
    for (std::size_t j = 1; j < set_b.size(); ++j) {
      if (dist(i, j) < dist(i, best_b[i])) best_b[i] = static_cast<int>(j);
    }
  }
  std::vector<int> best_a(set_b.size(), 0);
  for (std::size_t j = 0; j < set_b.size(); ++j) {
    for (std::size_t i = 1; i < set_a.size(); ++i) {
      if (dist(i, j) < dist(best_a[j], j)) best_a[j] = static_cast<int>(i);
    }
  }
  for (std::size_t i = 0; i < set_a.size(); ++i) {
    const int j = best_b[i];
    if (best_a[j] == static_cast<int>(i) && dist(i, j) <= max_dist) {
      pairs.emplace_back(static_cast<int>(i), j);
    }
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Sequential pairwise re-identification
// ---------------------------------------------------------------------------

struct GlobalIdMap {
  std::map<std::pair<int, int>, int> ids;  // (camera_id, track_id) -> global
  int global_count = 0;

  int at(int camera_id, int track_id) const {
    const auto it = ids.find({camera_id, track_id});
    if (it == ids.end()) {
      throw std::out_of_range("no global id for camera " +
                              std::to_string(camera_id) + " track " +
                              std::to_string(track_id));
    }
    return it->second;
  }
};

/// Merges camera track-sets into global identities one camera at a time:
/// the accumulated global set is cross-matched against each new camera's
/// signatures; matches inherit the global id (the global summary becomes
/// the mean of all member summaries), everything else gets a fresh id.
inline GlobalIdMap sequential_reid_signatures(
    const std::vector<std::vector<TrackSignature>>& cameras, double max_dist) {
  GlobalIdMap map;

  struct GlobalEntry {
    TrackSignature signature;  // summary = mean of member summaries
    std::vector<Eigen::VectorXd> member_summaries;
    int global_id = 0;
  };
  std::vector<GlobalEntry> global_set;

  for (const std::vector<TrackSignature>& camera : cameras) {
    std::vector<int> assigned(camera.size(), 0);
    if (!global_set.empty() && !camera.empty()) {
      std::vector<TrackSignature> global_signatures;
      global_signatures.reserve(global_set.size());
      for (const GlobalEntry& e : global_set) {
        global_signatures.push_back(e.signature);
      }
      for (const auto& [gi, ci] : cross_match(global_signatures, camera,
                                              max_dist)) {
        GlobalEntry& entry = global_set[static_cast<std::size_t>(gi)];
        const TrackSignature& sig = camera[static_cast<std::size_t>(ci)];
        map.ids[{sig.camera_id, sig.track_id}] = entry.global_id;
        assigned[static_cast<std::size_t>(ci)] = 1;
        entry.member_summaries.push_back(sig.summary);
        Eigen::VectorXd mean =
            Eigen::VectorXd::Zero(entry.member_summaries.front().size());
        for (const Eigen::VectorXd& s : entry.member_summaries) mean += s;
        entry.signature.summary =
            mean / static_cast<double>(entry.member_summaries.size());
      }
    }
    for (std::size_t ci = 0; ci < camera.size(); ++ci) {
      if (assigned[ci]) continue;
      GlobalEntry entry;
      entry.signature = camera[ci];
      entry.member_summaries.push_back(camera[ci].summary);
      entry.global_id = ++map.global_count;
      map.ids[{camera[ci].camera_id, camera[ci].track_id}] = entry.global_id;
      global_set.push_back(std::move(entry));
    }
  }
  return map;
}

/// Convenience overload: builds the signatures from tracks carrying
/// per-detection features. Cameras are processed in the given order.
inline GlobalIdMap sequential_reid(
    const std::vector<std::vector<Track>>& per_camera_tracks,
    const EmbeddingModel& model, double max_dist) {
  std::vector<std::vector<TrackSignature>> signatures;
  signatures.reserve(per_camera_tracks.size());
  for (const std::vector<Track>& camera : per_camera_tracks) {
    std::vector<TrackSignature> sigs;
    sigs.reserve(camera.size());
    for (const Track& t : camera) sigs.push_back(build_signature(t, model));
    signatures.push_back(std::move(sigs));
  }
  return sequential_reid_signatures(signatures, max_dist);
}

/// Flattens re-identified tracks to output rows ordered by
/// (camera, frame, global id).
inline std::vector<MtmcRow> mtmc_rows_from_tracks(
    const std::vector<std::vector<Track>>& per_camera_tracks,
    const GlobalIdMap& map) {
  std::vector<MtmcRow> rows;
  for (const std::vector<Track>& camera : per_camera_tracks) {
    for (const Track& t : camera) {
      const int global_id = map.at(t.camera_id, t.track_id);
      for (const Detection& d : t.detections) {
        rows.push_back(MtmcRow{t.camera_id, global_id, d.frame, d.box});
      }
    }
  }
  std::sort(rows.begin(), rows.end(), [](const MtmcRow& a, const MtmcRow& b) {
    if (a.camera != b.camera) return a.camera < b.camera;
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.global_id < b.global_id;
  });
  return rows;
}

}  // namespace mctrack
