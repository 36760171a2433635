#include "mctrack/kalman.hpp"

#include "mctrack/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace mctrack {
namespace {

// ---------------------------------------------------------------------------
// Scalar oracle: a hand-written 2-state (position, velocity) filter using the
// same noise scales. When the observed area and aspect stay constant, the
// box filter's (cx, vcx) block evolves independently and must match this
// oracle step for step.
// ---------------------------------------------------------------------------
struct Scalar2 {
  double m0 = 0.0, m1 = 0.0;               // position, velocity
  double p00 = 0.0, p01 = 0.0, p11 = 0.0;  // symmetric covariance
};

Scalar2 scalar_init(double z, double h, const KalmanNoiseConfig& cfg) {
  Scalar2 s;
  s.m0 = z;
  s.m1 = 0.0;
  const double sp = 2.0 * cfg.position_weight * h;
  const double sv = 10.0 * cfg.velocity_weight * h;
  s.p00 = sp * sp;
  s.p11 = sv * sv;
  s.p01 = 0.0;
  return s;
}

Scalar2 scalar_predict(const Scalar2& s, double h,
                       const KalmanNoiseConfig& cfg) {
  Scalar2 o;
  o.m0 = s.m0 + s.m1;
  o.m1 = s.m1;
  const double qp = (cfg.position_weight * h) * (cfg.position_weight * h);
  const double qv = (cfg.velocity_weight * h) * (cfg.velocity_weight * h);
  o.p00 = s.p00 + s.p01 + s.p01 + s.p11 + qp;
  o.p01 = s.p01 + s.p11;
  o.p11 = s.p11 + qv;
  return o;
}

Scalar2 scalar_update(const Scalar2& s, double z, double h,
                      const KalmanNoiseConfig& cfg) {
  const double r = (cfg.position_weight * h) * (cfg.position_weight * h);
  const double denom = s.p00 + r;
  const double k0 = s.p00 / denom;
  const double k1 = s.p01 / denom;
  Scalar2 o;
  const double innov = z - s.m0;
  o.m0 = s.m0 + k0 * innov;
  o.m1 = s.m1 + k1 * innov;
  // Joseph form: (I - K H) P (I - K H)^T + K R K^T with H = [1, 0].
  const double a00 = 1.0 - k0;
  const double b00 = a00 * s.p00;          // (A P) row 0
  const double b01 = a00 * s.p01;
  const double c00 = -k1 * s.p00 + s.p01;  // (A P) row 1
  const double c01 = -k1 * s.p01 + s.p11;
  o.p00 = b00 * a00 + k0 * r * k0;
  o.p01 = -b00 * k1 + b01 + k0 * r * k1;
  o.p11 = -c00 * k1 + c01 + k1 * r * k1;
  return o;
}

BoundingBox square_box(double cx, double cy, double side) {
  return BoundingBox{cx - side / 2.0, cy - side / 2.0, side, side};
}

TEST(KalmanInitTest, StartsAtObservationWithZeroVelocity) {
  const BoundingBox b{10, 20, 30, 40};
  const KalmanTrackState s = kalman_init(b);
  EXPECT_DOUBLE_EQ(s.mean[0], 25.0);
  EXPECT_DOUBLE_EQ(s.mean[1], 40.0);
  EXPECT_DOUBLE_EQ(s.mean[2], 1200.0);
  EXPECT_DOUBLE_EQ(s.mean[3], 0.75);
  EXPECT_DOUBLE_EQ(s.mean[4], 0.0);
  EXPECT_DOUBLE_EQ(s.mean[5], 0.0);
  EXPECT_DOUBLE_EQ(s.mean[6], 0.0);
  EXPECT_EQ(s.hits, 1);
  EXPECT_EQ(s.age, 0);
  EXPECT_EQ(s.time_since_update, 0);

  const BoundingBox back = state_box(s);
  EXPECT_NEAR(back.left, 10.0, 1e-9);
  EXPECT_NEAR(back.top, 20.0, 1e-9);
  EXPECT_NEAR(back.width, 30.0, 1e-9);
  EXPECT_NEAR(back.height, 40.0, 1e-9);

  EXPECT_THROW(kalman_init(BoundingBox{0, 0, 0, 5}), std::invalid_argument);
}

TEST(KalmanPredictTest, AddsVelocityToPosition) {
  KalmanTrackState s;
  s.mean << 0, 0, 100, 1, 2, 3, 0;
  const KalmanTrackState out = kalman_predict(s);
  EXPECT_DOUBLE_EQ(out.mean[0], 2.0);
  EXPECT_DOUBLE_EQ(out.mean[1], 3.0);
  EXPECT_DOUBLE_EQ(out.mean[2], 100.0);
  EXPECT_DOUBLE_EQ(out.mean[3], 1.0);
  EXPECT_DOUBLE_EQ(out.mean[4], 2.0);
  EXPECT_DOUBLE_EQ(out.mean[5], 3.0);
  EXPECT_DOUBLE_EQ(out.mean[6], 0.0);
  EXPECT_EQ(out.age, s.age + 1);
  EXPECT_EQ(out.time_since_update, s.time_since_update + 1);
}

TEST(KalmanPredictTest, ZeroVelocityKeepsPosition) {
  const KalmanTrackState s = kalman_init(square_box(50, 60, 20));
  const KalmanTrackState out = kalman_predict(s);
  EXPECT_DOUBLE_EQ(out.mean[0], 50.0);
  EXPECT_DOUBLE_EQ(out.mean[1], 60.0);
}

TEST(KalmanPredictTest, CovarianceTraceGrows) {
  KalmanTrackState s = kalman_init(square_box(50, 60, 20));
  for (int i = 0; i < 5; ++i) {
    const KalmanTrackState out = kalman_predict(s);
    EXPECT_GT(out.covariance.trace(), s.covariance.trace());
    s = out;
  }
}

TEST(KalmanPredictTest, CollapsingAreaIsClampedAndFlagged) {
  KalmanTrackState s = kalman_init(square_box(50, 60, 4));
  s.mean[6] = -(s.mean[2] + 1.0);  // area velocity drives s below zero
  const KalmanTrackState out = kalman_predict(s);
  EXPECT_TRUE(out.scale_degenerate);
  EXPECT_GT(out.mean[2], 0.0);
  EXPECT_LE(out.mean[2], 1e-6);
}

TEST(KalmanUpdateTest, ZeroInnovationKeepsMean) {
  KalmanTrackState s = kalman_init(square_box(50, 60, 20));
  s = kalman_predict(s);
  const BoundingBox obs = state_box(s);
  const KalmanTrackState out = kalman_update(s, obs);
  for (int i = 0; i < 7; ++i) {
    EXPECT_NEAR(out.mean[i], s.mean[i], 1e-9) << "component " << i;
  }
  EXPECT_EQ(out.time_since_update, 0);
  EXPECT_EQ(out.hits, s.hits + 1);
}

TEST(KalmanUpdateTest, TinyMeasurementNoisePullsToObservation) {
  KalmanTrackState s = kalman_init(square_box(50, 60, 20));
  s = kalman_predict(s);
  const BoundingBox obs = square_box(53, 58, 20);  // same area and aspect
  KalmanNoiseConfig tight;
  tight.position_weight = 1e-6;
  const KalmanTrackState out = kalman_update(s, obs, tight);
  const BoundingBox fitted = state_box(out);
  EXPECT_NEAR(fitted.left, obs.left, 1e-6);
  EXPECT_NEAR(fitted.top, obs.top, 1e-6);
  EXPECT_NEAR(fitted.width, obs.width, 1e-6);
  EXPECT_NEAR(fitted.height, obs.height, 1e-6);
}

TEST(KalmanUpdateTest, InvalidObservationThrows) {
  const KalmanTrackState s = kalman_init(square_box(50, 60, 20));
  EXPECT_THROW(kalman_update(s, BoundingBox{0, 0, -1, 5}),
               std::invalid_argument);
}

TEST(KalmanCovarianceTest, StaysSymmetricPositiveSemidefinite) {
  std::mt19937_64 rng(53);
  KalmanTrackState s = kalman_init(square_box(100, 100, 30));
  for (int step = 0; step < 60; ++step) {
    s = kalman_predict(s);
    if (detail::uniform_unit(rng) < 0.7) {
      const double cx = 100.0 + detail::uniform_range(rng, -5.0, 5.0);
      const double cy = 100.0 + detail::uniform_range(rng, -5.0, 5.0);
      const double side = 30.0 + detail::uniform_range(rng, -2.0, 2.0);
      const KalmanTrackState prior = s;
      s = kalman_update(s, square_box(cx, cy, side));
      // The observed block must not gain uncertainty from an update.
      const Eigen::Matrix4d shrink = prior.covariance.topLeftCorner<4, 4>() -
                                     s.covariance.topLeftCorner<4, 4>();
      const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(shrink);
      EXPECT_GT(es.eigenvalues().minCoeff(), -1e-9);
    }
    const Eigen::Matrix<double, 7, 7> diff =
        s.covariance - s.covariance.transpose();
    EXPECT_LT(diff.cwiseAbs().maxCoeff(), 1e-12);
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 7, 7>> es(
        s.covariance);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-9);
  }
}

// Constant area and aspect decouple the horizontal block; the full filter
// must reproduce the scalar oracle's mean and covariance trajectory.
TEST(KalmanOracleTest, MatchesScalarFilterFor100Steps) {
  std::mt19937_64 rng(59);
  const KalmanNoiseConfig cfg;
  const double side = 24.0;  // area 576, aspect 1, height 24
  const double h = 24.0;

  double cx = 300.0;
  const BoundingBox first = square_box(cx, 200.0, side);
  KalmanTrackState state = kalman_init(first, cfg);
  Scalar2 oracle = scalar_init(box_to_observation(first)[0], h, cfg);

  for (int step = 0; step < 100; ++step) {
    state = kalman_predict(state, cfg);
    oracle = scalar_predict(oracle, h, cfg);
    cx += detail::uniform_range(rng, -4.0, 4.0);
    const BoundingBox obs = square_box(cx, 200.0, side);
    const double z = box_to_observation(obs)[0];
    state = kalman_update(state, obs, cfg);
    oracle = scalar_update(oracle, z, h, cfg);

    EXPECT_NEAR(state.mean[0], oracle.m0, 1e-9) << "step " << step;
    EXPECT_NEAR(state.mean[4], oracle.m1, 1e-9) << "step " << step;
    EXPECT_NEAR(state.covariance(0, 0), oracle.p00, 1e-9) << "step " << step;
    EXPECT_NEAR(state.covariance(0, 4), oracle.p01, 1e-9) << "step " << step;
    EXPECT_NEAR(state.covariance(4, 4), oracle.p11, 1e-9) << "step " << step;
  }
}

TEST(KalmanOracleTest, VelocityConvergesForConstantMotion) {
  const double v = 3.0;
  double cx = 100.0;
  KalmanTrackState state = kalman_init(square_box(cx, 200.0, 24.0));
  for (int step = 0; step < 20; ++step) {
    state = kalman_predict(state);
    cx += v;
    state = kalman_update(state, square_box(cx, 200.0, 24.0));
  }
  EXPECT_LE(std::abs(state.mean[4] - v) / v, 0.05);
}

}  // namespace
}  // namespace mctrack
