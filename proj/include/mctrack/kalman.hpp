#pragma once

#include "mctrack/geometry.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace mctrack {

/// Noise scales for the constant-velocity box filter, expressed relative to
/// the box height (position/velocity terms) and box area (scale terms).
struct KalmanNoiseConfig {
  double position_weight = 1.0 / 20.0;
  double velocity_weight = 1.0 / 160.0;
};

/// Constant-velocity box filter state. The mean is
/// (cx, cy, s, r, vcx, vcy, vs): box center, area, aspect ratio (w/h) and
/// their velocities; the aspect ratio is assumed constant.
struct KalmanTrackState {
  Eigen::Matrix<double, 7, 1> mean = Eigen::Matrix<double, 7, 1>::Zero();
  Eigen::Matrix<double, 7, 7> covariance =
      Eigen::Matrix<double, 7, 7>::Identity();
  int time_since_update = 0;
  int hits = 0;
  int age = 0;
  bool scale_degenerate = false;  // set when the predicted area collapses
};

using Vector4d = Eigen::Matrix<double, 4, 1>;

inline Vector4d box_to_observation(const BoundingBox& box) {
  Vector4d z;
  z << box.left + box.width / 2.0, box.top + box.height / 2.0,
      box.width * box.height, box.width / box.height;
  return z;
}

inline BoundingBox observation_to_box(const Vector4d& z) {
  const double w = std::sqrt(std::max(z[2] * z[3], 1e-12));
  const double h = std::sqrt(std::max(z[2] / z[3], 1e-12));
  return BoundingBox{z[0] - w / 2.0, z[1] - h / 2.0, w, h};
}

inline BoundingBox state_box(const KalmanTrackState& state) {
  return observation_to_box(state.mean.head<4>());
}

namespace detail {

inline double state_height(const Eigen::Matrix<double, 7, 1>& mean) {
  return std::sqrt(std::max(mean[2] / std::max(mean[3], 1e-12), 1e-12));
}

inline Eigen::Matrix<double, 7, 7> process_noise(
    const Eigen::Matrix<double, 7, 1>& mean, const KalmanNoiseConfig& cfg) {
  const double h = state_height(mean);
  const double s = std::max(mean[2], 1e-12);
  Eigen::Matrix<double, 7, 1> std;
  std << cfg.position_weight * h, cfg.position_weight * h,
      cfg.position_weight * s, 1e-2, cfg.velocity_weight * h,
      cfg.velocity_weight * h, cfg.velocity_weight * s;
  return std.array().square().matrix().asDiagonal();
}

inline Eigen::Matrix<double, 4, 4> measurement_noise(
    const Eigen::Matrix<double, 7, 1>& mean, const KalmanNoiseConfig& cfg) {
  const double h = state_height(mean);
  const double s = std::max(mean[2], 1e-12);
  Eigen::Matrix<double, 4, 1> std;
  std << cfg.position_weight * h, cfg.position_weight * h,
      cfg.position_weight * s, 1e-1;
  return std.array().square().matrix().asDiagonal();
}

inline Eigen::Matrix<double, 7, 7> transition() {
  Eigen::Matrix<double, 7, 7> f = Eigen::Matrix<double, 7, 7>::Identity();
  f(0, 4) = 1.0;
  f(1, 5) = 1.0;
  f(2, 6) = 1.0;
  return f;
}

inline Eigen::Matrix<double, 4, 7> observation_model() {
  Eigen::Matrix<double, 4, 7> h = Eigen::Matrix<double, 4, 7>::Zero();
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;
  h(2, 2) = 1.0;
  h(3, 3) = 1.0;
  return h;
}

}  // namespace detail

/// Initializes the filter from a first observation: zero velocities with
/// inflated velocity uncertainty.
inline KalmanTrackState kalman_init(const BoundingBox& box,
                                    const KalmanNoiseConfig& cfg = {}) {
  if (!box.valid()) throw std::invalid_argument("kalman_init: invalid box");
  KalmanTrackState state;
  state.mean.head<4>() = box_to_observation(box);
  state.mean.tail<3>().setZero();
  const double h = detail::state_height(state.mean);
  const double s = state.mean[2];
  Eigen::Matrix<double, 7, 1> std;
  std << 2.0 * cfg.position_weight * h, 2.0 * cfg.position_weight * h,
      2.0 * cfg.position_weight * s, 1e-2, 10.0 * cfg.velocity_weight * h,
      10.0 * cfg.velocity_weight * h, 10.0 * cfg.velocity_weight * s;
  state.covariance = std.array().square().matrix().asDiagonal();
  state.hits = 1;
  return state;
}

/// Advances the state one frame under the constant-velocity model.
/// A collapsing area (s + vs <= 0) is clamped to a small epsilon and the
/// state flagged so the owning tracker can retire it.
inline KalmanTrackState kalman_predict(const KalmanTrackState& state,
                                       const KalmanNoiseConfig& cfg = {}) {
  KalmanTrackState out = state;
  const Eigen::Matrix<double, 7, 7> f = detail::transition();
  const Eigen::Matrix<double, 7, 7> q = detail::process_noise(state.mean, cfg);
  if (state.mean[2] + state.mean[6] <= 0.0) {
    out.mean[0] += state.mean[4];
    out.mean[1] += state.mean[5];
    out.mean[2] = 1e-6;
    out.scale_degenerate = true;
  } else {
    out.mean = f * state.mean;
  }
  out.covariance = f * state.covariance * f.transpose() + q;
  out.covariance =
      ((out.covariance + out.covariance.transpose()) / 2.0).eval();
  out.time_since_update = state.time_since_update + 1;
  out.age = state.age + 1;
  return out;
}

/// Standard Kalman correction with the box observed as (cx, cy, s, r),
/// using the Joseph-form covariance update.
inline KalmanTrackState kalman_update(const KalmanTrackState& state,
                                      const BoundingBox& obs,
                                      const KalmanNoiseConfig& cfg = {}) {
  if (!obs.valid()) {
    throw std::invalid_argument("kalman_update: invalid observation box");
  }
  const Vector4d z = box_to_observation(obs);
  if (!z.allFinite()) {
    throw std::invalid_argument("kalman_update: non-finite observation");
  }
  const Eigen::Matrix<double, 4, 7> h = detail::observation_model();
  const Eigen::Matrix<double, 4, 4> r =
      detail::measurement_noise(state.mean, cfg);

  KalmanTrackState out = state;
  const Vector4d innovation = z - h * state.mean;
  const Eigen::Matrix<double, 4, 4> s_mat =
      h * state.covariance * h.transpose() + r;
  // K = P H^T S^-1, computed via an LDLT solve of the symmetric S.
  const Eigen::Matrix<double, 7, 4> pht = state.covariance * h.transpose();
  const Eigen::Matrix<double, 7, 4> k =
      s_mat.ldlt().solve(pht.transpose()).transpose();
  out.mean = state.mean + k * innovation;
  const Eigen::Matrix<double, 7, 7> ikh =
      Eigen::Matrix<double, 7, 7>::Identity() - k * h;
  out.covariance =
      ikh * state.covariance * ikh.transpose() + k * r * k.transpose();
  out.covariance =
      ((out.covariance + out.covariance.transpose()) / 2.0).eval();
  if (out.mean[2] <= 0.0) {
    out.mean[2] = 1e-6;
    out.scale_degenerate = true;
  }
  if (out.mean[3] <= 0.0) {
    out.mean[3] = 1e-6;
    out.scale_degenerate = true;
  }
  out.time_since_update = 0;
  out.hits = state.hits + 1;
  return out;
}

}  // namespace mctrack
