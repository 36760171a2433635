#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mctrack {

/// Appearance descriptor attached to a detection. Dimension is set by the
/// active feature provider; all components must be finite.
using FeatureVector = Eigen::VectorXd;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Axis-aligned box in pixel coordinates, top-left anchored.
/// Continuous values are permitted; width and height must be positive.
struct BoundingBox {
  double left = 0.0;
  double top = 0.0;
  double width = 0.0;
  double height = 0.0;

  double right() const { return left + width; }
  double bottom() const { return top + height; }
  double area() const { return width * height; }

  bool valid() const {
    return width > 0.0 && height > 0.0 && std::isfinite(left) &&
           std::isfinite(top) && std::isfinite(width) && std::isfinite(height);
  }
};

inline Point centroid(const BoundingBox& b) {
  return {b.left + b.width / 2.0, b.top + b.height / 2.0};
}

/// Intersection over union of two boxes. Degenerate overlap yields 0.
/// Box areas are derived from the same rounded edge coordinates as the
/// intersection, so identical boxes score exactly 1 and the result never
/// exceeds 1.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::min(a.right(), b.right()) - std::max(a.left, b.left);
  const double iy =
      std::min(a.bottom(), b.bottom()) - std::max(a.top, b.top);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double area_a = (a.right() - a.left) * (a.bottom() - a.top);
  const double area_b = (b.right() - b.left) * (b.bottom() - b.top);
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

/// One detector output: frame index (0-based), box, confidence in [0,1]
/// and an optional appearance feature.
struct Detection {
  int frame = 0;
  BoundingBox box;
  double confidence = 1.0;
  std::optional<FeatureVector> feature;
};

/// Ordered per-camera trajectory. Frames are strictly increasing; all
/// detections belong to the same camera.
struct Track {
  int camera_id = 0;
  int track_id = 0;
  std::vector<Detection> detections;

  bool empty() const { return detections.empty(); }
  int first_frame() const { return detections.front().frame; }
  int last_frame() const { return detections.back().frame; }
  const BoundingBox& last_box() const { return detections.back().box; }
};

/// Appends a detection, enforcing the strictly-increasing-frame invariant.
inline void append_detection(Track& track, const Detection& det) {
  if (!track.detections.empty() && det.frame <= track.last_frame()) {
    throw std::invalid_argument(
        "track " + std::to_string(track.track_id) +
        ": detection frame " + std::to_string(det.frame) +
        " not after last frame " + std::to_string(track.last_frame()));
  }
  track.detections.push_back(det);
}

/// Mean of the unbiased per-axis variances of the track's box centroids,
/// in pixels^2. A track with fewer than two detections has variance 0.
inline double centroid_variance(const Track& track) {
  const std::size_t n = track.detections.size();
  if (n < 2) return 0.0;
  double mx = 0.0, my = 0.0;
  for (const Detection& d : track.detections) {
    const Point c = centroid(d.box);
    mx += c.x;
    my += c.y;
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sx = 0.0, sy = 0.0;
  for (const Detection& d : track.detections) {
    const Point c = centroid(d.box);
    sx += (c.x - mx) * (c.x - mx);
    sy += (c.y - my) * (c.y - my);
  }
  const double denom = static_cast<double>(n - 1);
  return (sx / denom + sy / denom) / 2.0;
}

}  // namespace mctrack
