#include "mctrack/geometry.hpp"
#include "mctrack/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace mctrack {
namespace {

BoundingBox box(double l, double t, double w, double h) {
  return BoundingBox{l, t, w, h};
}

BoundingBox random_box(std::mt19937_64& rng) {
  const double l = detail::uniform_range(rng, -50.0, 50.0);
  const double t = detail::uniform_range(rng, -50.0, 50.0);
  const double w = detail::uniform_range(rng, 0.5, 40.0);
  const double h = detail::uniform_range(rng, 0.5, 40.0);
  return BoundingBox{l, t, w, h};
}

TEST(BoundingBoxTest, AreaAndEdges) {
  const BoundingBox b = box(2.0, 4.0, 6.0, 8.0);
  EXPECT_DOUBLE_EQ(b.right(), 8.0);
  EXPECT_DOUBLE_EQ(b.bottom(), 12.0);
  EXPECT_DOUBLE_EQ(b.area(), 48.0);
  EXPECT_TRUE(b.valid());
  EXPECT_FALSE(box(0, 0, 0, 5).valid());
  EXPECT_FALSE(box(0, 0, 5, -1).valid());
  EXPECT_FALSE(box(std::nan(""), 0, 5, 5).valid());
}

TEST(IouTest, IdenticalBoxesGiveOne) {
  const BoundingBox b = box(3.0, -2.0, 11.0, 7.0);
  EXPECT_DOUBLE_EQ(iou(b, b), 1.0);
}

TEST(IouTest, DisjointBoxesGiveZero) {
  EXPECT_DOUBLE_EQ(iou(box(0, 0, 10, 10), box(20, 20, 10, 10)), 0.0);
  // Touching edges count as zero overlap.
  EXPECT_DOUBLE_EQ(iou(box(0, 0, 10, 10), box(10, 0, 10, 10)), 0.0);
}

TEST(IouTest, HalfContainedExample) {
  EXPECT_DOUBLE_EQ(iou(box(0, 0, 10, 10), box(0, 0, 10, 20)), 0.5);
}

TEST(IouTest, SymmetricAndBounded) {
  std::mt19937_64 rng(7);
  for (int it = 0; it < 500; ++it) {
    const BoundingBox a = random_box(rng);
    const BoundingBox b = random_box(rng);
    const double ab = iou(a, b);
    const double ba = iou(b, a);
    EXPECT_DOUBLE_EQ(ab, ba);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
  }
}

TEST(IouTest, EqualsOneOnlyForEqualBoxes) {
  std::mt19937_64 rng(11);
  for (int it = 0; it < 500; ++it) {
    const BoundingBox a = random_box(rng);
    BoundingBox b = a;
    EXPECT_DOUBLE_EQ(iou(a, b), 1.0);
    b.left += detail::uniform_range(rng, 0.01, 1.0);
    EXPECT_LT(iou(a, b), 1.0);
  }
}

TEST(IouTest, TranslationAndScaleInvariant) {
  std::mt19937_64 rng(13);
  for (int it = 0; it < 300; ++it) {
    const BoundingBox a = random_box(rng);
    const BoundingBox b = random_box(rng);
    const double base = iou(a, b);

    const double dx = detail::uniform_range(rng, -100.0, 100.0);
    const double dy = detail::uniform_range(rng, -100.0, 100.0);
    const BoundingBox at{a.left + dx, a.top + dy, a.width, a.height};
    const BoundingBox bt{b.left + dx, b.top + dy, b.width, b.height};
    EXPECT_NEAR(iou(at, bt), base, 1e-9);

    const double k = detail::uniform_range(rng, 0.1, 10.0);
    const BoundingBox as{a.left * k, a.top * k, a.width * k, a.height * k};
    const BoundingBox bs{b.left * k, b.top * k, b.width * k, b.height * k};
    EXPECT_NEAR(iou(as, bs), base, 1e-9);
  }
}

TEST(CentroidTest, Examples) {
  const Point c1 = centroid(box(0, 0, 10, 10));
  EXPECT_DOUBLE_EQ(c1.x, 5.0);
  EXPECT_DOUBLE_EQ(c1.y, 5.0);
  const Point c2 = centroid(box(2, 4, 6, 8));
  EXPECT_DOUBLE_EQ(c2.x, 5.0);
  EXPECT_DOUBLE_EQ(c2.y, 8.0);
}

TEST(TrackTest, AppendEnforcesIncreasingFrames) {
  Track t;
  t.track_id = 3;
  append_detection(t, Detection{0, box(0, 0, 5, 5), 1.0, {}});
  append_detection(t, Detection{2, box(1, 0, 5, 5), 1.0, {}});
  EXPECT_EQ(t.first_frame(), 0);
  EXPECT_EQ(t.last_frame(), 2);
  EXPECT_THROW(append_detection(t, Detection{2, box(0, 0, 5, 5), 1.0, {}}),
               std::invalid_argument);
  EXPECT_THROW(append_detection(t, Detection{1, box(0, 0, 5, 5), 1.0, {}}),
               std::invalid_argument);
}

TEST(CentroidVarianceTest, ShortTracksAreZero) {
  Track t;
  EXPECT_DOUBLE_EQ(centroid_variance(t), 0.0);
  append_detection(t, Detection{0, box(0, 0, 5, 5), 1.0, {}});
  EXPECT_DOUBLE_EQ(centroid_variance(t), 0.0);
}

TEST(CentroidVarianceTest, StationaryTrackIsZero) {
  Track t;
  for (int f = 0; f < 40; ++f) {
    append_detection(t, Detection{f, box(10, 20, 8, 6), 1.0, {}});
  }
  EXPECT_DOUBLE_EQ(centroid_variance(t), 0.0);
}

// Independent closed form: centroids move along x only, step d, n points.
// Unbiased variance of {0, d, .., (n-1)d} is d^2 n (n+1) / 12; the y axis
// contributes zero and the two axes are averaged.
TEST(CentroidVarianceTest, LinearMotionClosedForm) {
  const double d = 2.5;
  const int n = 12;
  Track t;
  for (int f = 0; f < n; ++f) {
    append_detection(t, Detection{f, box(d * f, 7.0, 4, 4), 1.0, {}});
  }
  const double expect = d * d * n * (n + 1) / 12.0 / 2.0;
  EXPECT_NEAR(centroid_variance(t), expect, 1e-9);
}

// Oracle: recompute the mean of per-axis unbiased variances with plain
// accumulation over random walks.
TEST(CentroidVarianceTest, MatchesDirectComputation) {
  std::mt19937_64 rng(17);
  for (int it = 0; it < 100; ++it) {
    const int n = 2 + static_cast<int>(detail::uniform_below(rng, 30));
    Track t;
    std::vector<Point> cs;
    double x = 0.0, y = 0.0;
    for (int f = 0; f < n; ++f) {
      x += detail::uniform_range(rng, -3.0, 3.0);
      y += detail::uniform_range(rng, -3.0, 3.0);
      const BoundingBox b = box(x, y, 6.0, 4.0);
      append_detection(t, Detection{f, b, 1.0, {}});
      cs.push_back(centroid(b));
    }
    double mx = 0.0, my = 0.0;
    for (const Point& c : cs) {
      mx += c.x;
      my += c.y;
    }
    mx /= n;
    my /= n;
    double vx = 0.0, vy = 0.0;
    for (const Point& c : cs) {
      vx += (c.x - mx) * (c.x - mx);
      vy += (c.y - my) * (c.y - my);
    }
    vx /= n - 1;
    vy /= n - 1;
    EXPECT_NEAR(centroid_variance(t), (vx + vy) / 2.0, 1e-9);
  }
}

}  // namespace
}  // namespace mctrack
