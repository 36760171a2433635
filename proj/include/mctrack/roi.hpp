#pragma once

#include "mctrack/geometry.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace mctrack {

/// Per-camera binary region-of-interest mask. A pixel (x, y) covers the
/// square [x, x+1) x [y, y+1); its center sits at (x+0.5, y+0.5).
///
/// Boundary pixels (inside pixels 4-adjacent to an outside pixel or to the
/// image edge) are precomputed at construction so that distance queries
/// stay cheap; the mask is immutable afterwards.
class RoiMask {
 public:
  RoiMask(int width, int height, std::vector<std::uint8_t> inside)
      : width_(width), height_(height), inside_(std::move(inside)) {
    if (width_ <= 0 || height_ <= 0 ||
        inside_.size() != static_cast<std::size_t>(width_) * height_) {
      throw std::invalid_argument("roi mask: grid does not match dimensions");
    }
    bool any = false;
    for (std::uint8_t v : inside_) any = any || v != 0;
    if (!any) throw std::invalid_argument("roi mask: no inside pixel");
    collect_boundary();
  }

  int width() const { return width_; }
  int height() const { return height_; }

  bool inside(int x, int y) const {
    return inside_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }

  /// Centers of the boundary pixels of the inside region.
  const std::vector<Point>& boundary_centers() const { return boundary_; }

  bool contains_point(const Point& p) const {
    return p.x >= 0.0 && p.x < width_ && p.y >= 0.0 && p.y < height_;
  }

 private:
  void collect_boundary() {
    auto outside_or_edge = [&](int x, int y) {
      if (x < 0 || x >= width_ || y < 0 || y >= height_) return true;
      return !inside(x, y);
    };
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        if (!inside(x, y)) continue;
        if (outside_or_edge(x - 1, y) || outside_or_edge(x + 1, y) ||
            outside_or_edge(x, y - 1) || outside_or_edge(x, y + 1)) {
          boundary_.push_back({x + 0.5, y + 0.5});
        }
      }
    }
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> inside_;
  std::vector<Point> boundary_;
};

/// Signed Euclidean distance (in pixels) from p to the nearest boundary
/// pixel center of the mask's inside region. Negative when the pixel
/// containing p lies outside the region. Throws if p is out of the image.
inline double distance_to_roi_border(const Point& p, const RoiMask& mask) {
  if (!mask.contains_point(p)) {
    throw std::out_of_range("distance_to_roi_border: point outside image");
  }
  double best_sq = std::numeric_limits<double>::infinity();
  for (const Point& c : mask.boundary_centers()) {
    const double dx = p.x - c.x;
    const double dy = p.y - c.y;
    const double d = dx * dx + dy * dy;
    if (d < best_sq) best_sq = d;
  }
  const double dist = std::sqrt(best_sq);
  const int px = static_cast<int>(std::floor(p.x));
  const int py = static_cast<int>(std::floor(p.y));
  return mask.inside(px, py) ? dist : -dist;
}

/// Keeps the detections whose box centroid lies at least `threshold` pixels
/// inside the region of interest; order is preserved. Centroids falling
/// outside the image bounds are treated as outside the region.
inline std::vector<Detection> filter_by_roi(const std::vector<Detection>& dets,
                                            const RoiMask& mask,
                                            double threshold) {
  if (threshold < 0.0) {
    throw std::invalid_argument("filter_by_roi: negative threshold");
  }
  std::vector<Detection> kept;
  kept.reserve(dets.size());
  for (const Detection& det : dets) {
    const Point c = centroid(det.box);
    if (!mask.contains_point(c)) continue;
    if (distance_to_roi_border(c, mask) >= threshold) kept.push_back(det);
  }
  return kept;
}

}  // namespace mctrack
