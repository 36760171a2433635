#include "mctrack/io.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <string>
#include <vector>

namespace mctrack {
namespace {

using testutil::TempDir;
using testutil::write_text;

TEST(MotFileTest, RoundTripAndFrameIndexing) {
  TempDir dir("mot_roundtrip");
  const std::string path = dir.file("rows.txt");
  std::vector<MotRow> rows;
  rows.push_back({0, 3, BoundingBox{1.5, 2.25, 10.0, 20.0}, 0.75, -1, -1.0});
  rows.push_back({4, -1, BoundingBox{-3.0, 0.0, 5.5, 6.5}, 1.0, -1, -1.0});
  write_mot_file(path, rows);

  const auto back = read_mot_file(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].frame, 0);
  EXPECT_EQ(back[0].id, 3);
  EXPECT_DOUBLE_EQ(back[0].box.left, 1.5);
  EXPECT_DOUBLE_EQ(back[0].box.top, 2.25);
  EXPECT_DOUBLE_EQ(back[0].box.width, 10.0);
  EXPECT_DOUBLE_EQ(back[0].box.height, 20.0);
  EXPECT_DOUBLE_EQ(back[0].conf, 0.75);
  EXPECT_EQ(back[1].frame, 4);
  EXPECT_EQ(back[1].id, -1);

  // On disk the first frame must be 1 (internal frame 0).
  const std::string text = testutil::read_bytes(path);
  EXPECT_EQ(text.rfind("1,3,", 0), 0u);
}

TEST(MotFileTest, ParsesMinimalSixFieldRows) {
  TempDir dir("mot_six");
  const std::string path = dir.file("det.txt");
  write_text(path, "1,-1,10,20,30,40\n2,-1,11,21,31,41\n");
  const auto rows = read_mot_file(path);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].frame, 0);
  EXPECT_DOUBLE_EQ(rows[0].conf, 1.0);
  EXPECT_EQ(rows[1].frame, 1);
}

TEST(MotFileTest, SkipsBlankLinesAndCarriageReturns) {
  TempDir dir("mot_blank");
  const std::string path = dir.file("det.txt");
  write_text(path, "1,-1,10,20,30,40,0.5\r\n\n   \n2,-1,1,2,3,4,0.5\n");
  const auto rows = read_mot_file(path);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_DOUBLE_EQ(rows[0].conf, 0.5);
}

TEST(MotFileTest, MalformedRowsRaiseDataErrors) {
  TempDir dir("mot_bad");
  const std::string path = dir.file("det.txt");

  write_text(path, "1,-1,10,20\n");
  EXPECT_THROW(read_mot_file(path), DataError);

  write_text(path, "0,-1,10,20,30,40\n");  // disk frames start at 1
  EXPECT_THROW(read_mot_file(path), DataError);

  write_text(path, "1,-1,10,20,abc,40\n");
  try {
    read_mot_file(path);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(":1:"), std::string::npos);  // file:line context
    EXPECT_NE(msg.find("abc"), std::string::npos);
  }

  write_text(path, "1,-1,10,20,0,40\n");  // zero width
  EXPECT_THROW(read_mot_file(path), DataError);

  write_text(path, "1,-1,10,20,30,40,1.5\n");  // confidence above 1
  EXPECT_THROW(read_mot_file(path), DataError);

  write_text(path, "1.5,-1,10,20,30,40\n");  // fractional frame
  EXPECT_THROW(read_mot_file(path), DataError);

  EXPECT_THROW(read_mot_file(dir.file("missing.txt")), DataError);
}

TEST(MotFileTest, NegativeConfidenceMeansNoScore) {
  TempDir dir("mot_conf");
  const std::string path = dir.file("det.txt");
  write_text(path, "1,-1,10,20,30,40,-1\n");
  const auto rows = read_mot_file(path);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_DOUBLE_EQ(rows[0].conf, 1.0);
}

TEST(TracksFromRowsTest, GroupsAndSortsByFrame) {
  std::vector<MotRow> rows;
  rows.push_back({5, 2, BoundingBox{0, 0, 5, 5}, 1.0, -1, -1.0});
  rows.push_back({3, 1, BoundingBox{1, 0, 5, 5}, 1.0, -1, -1.0});
  rows.push_back({4, 2, BoundingBox{2, 0, 5, 5}, 1.0, -1, -1.0});
  rows.push_back({4, 1, BoundingBox{3, 0, 5, 5}, 1.0, -1, -1.0});
  const auto tracks = tracks_from_rows(rows, 7, "test");
  ASSERT_EQ(tracks.size(), 2u);
  EXPECT_EQ(tracks[0].track_id, 1);
  EXPECT_EQ(tracks[0].camera_id, 7);
  ASSERT_EQ(tracks[0].detections.size(), 2u);
  EXPECT_EQ(tracks[0].detections[0].frame, 3);
  EXPECT_EQ(tracks[0].detections[1].frame, 4);
  EXPECT_EQ(tracks[1].track_id, 2);
  EXPECT_EQ(tracks[1].detections[0].frame, 4);
  EXPECT_EQ(tracks[1].detections[1].frame, 5);
}

TEST(TracksFromRowsTest, DuplicateIdFrameIsError) {
  std::vector<MotRow> rows;
  rows.push_back({3, 1, BoundingBox{0, 0, 5, 5}, 1.0, -1, -1.0});
  rows.push_back({3, 1, BoundingBox{9, 9, 5, 5}, 1.0, -1, -1.0});
  EXPECT_THROW(tracks_from_rows(rows, 1, "test"), DataError);
}

TEST(RowsFromTracksTest, OrdersByFrameThenId) {
  Track a;
  a.track_id = 2;
  append_detection(a, {0, BoundingBox{0, 0, 5, 5}, 1.0, {}});
  append_detection(a, {1, BoundingBox{0, 0, 5, 5}, 1.0, {}});
  Track b;
  b.track_id = 1;
  append_detection(b, {1, BoundingBox{9, 9, 5, 5}, 1.0, {}});
  const auto rows = rows_from_tracks({a, b});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].frame, 0);
  EXPECT_EQ(rows[0].id, 2);
  EXPECT_EQ(rows[1].frame, 1);
  EXPECT_EQ(rows[1].id, 1);
  EXPECT_EQ(rows[2].frame, 1);
  EXPECT_EQ(rows[2].id, 2);
}

TEST(FeatureFileTest, RoundTripIsBitExact) {
  TempDir dir("feat_roundtrip");
  const std::string path = dir.file("feat.csv");
  std::vector<FeatureRow> rows(2);
  rows[0].camera = 1;
  rows[0].frame = 0;
  rows[0].id = 4;
  rows[0].feature = FeatureVector(3);
  rows[0].feature << 0.1, -2.0 / 3.0, 1e-17;
  rows[1].camera = 1;
  rows[1].frame = 9;
  rows[1].id = -1;
  rows[1].feature = FeatureVector(3);
  rows[1].feature << -0.0, 3.14159, 2.2250738585072014e-308;
  write_feature_file(path, rows);
  const auto back = read_feature_file(path);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].camera, rows[i].camera);
    EXPECT_EQ(back[i].frame, rows[i].frame);
    EXPECT_EQ(back[i].id, rows[i].id);
    ASSERT_EQ(back[i].feature.size(), rows[i].feature.size());
    for (Eigen::Index k = 0; k < rows[i].feature.size(); ++k) {
      EXPECT_EQ(back[i].feature[k], rows[i].feature[k]) << i << "," << k;
    }
  }
}

TEST(FeatureFileTest, DimensionChangeMidFileIsError) {
  TempDir dir("feat_dim");
  const std::string path = dir.file("feat.csv");
  write_text(path, "1,1,2,0.5,0.5\n1,2,2,0.5\n");
  EXPECT_THROW(read_feature_file(path), DataError);
}

TEST(FeatureFileTest, NonFiniteComponentIsError) {
  TempDir dir("feat_inf");
  const std::string path = dir.file("feat.csv");
  write_text(path, "1,1,2,inf,0.5\n");
  EXPECT_THROW(read_feature_file(path), DataError);
}

TEST(AttachFeaturesTest, ZipsAndValidates) {
  std::vector<MotRow> rows;
  rows.push_back({2, 5, BoundingBox{0, 0, 5, 5}, 0.9, -1, -1.0});
  std::vector<FeatureRow> feats(1);
  feats[0].camera = 1;
  feats[0].frame = 2;
  feats[0].id = 5;
  feats[0].feature = FeatureVector::Constant(4, 0.25);
  const auto dets = attach_features(rows, feats, "test");
  ASSERT_EQ(dets.size(), 1u);
  ASSERT_TRUE(dets[0].feature.has_value());
  EXPECT_EQ(dets[0].feature->size(), 4);

  feats[0].frame = 3;  // frame mismatch
  EXPECT_THROW(attach_features(rows, feats, "test"), DataError);
  feats[0].frame = 2;
  feats[0].id = 6;  // id mismatch
  EXPECT_THROW(attach_features(rows, feats, "test"), DataError);
  EXPECT_THROW(attach_features(rows, {}, "test"), DataError);
}

TEST(PgmTest, RoundTrip) {
  TempDir dir("pgm_roundtrip");
  const std::string path = dir.file("mask.pgm");
  GrayImage img;
  img.width = 5;
  img.height = 3;
  img.pixels.resize(15);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(i * 17);
  }
  write_pgm(path, img);
  const GrayImage back = read_pgm(path);
  EXPECT_EQ(back.width, 5);
  EXPECT_EQ(back.height, 3);
  EXPECT_EQ(back.pixels, img.pixels);
}

TEST(PgmTest, HeaderCommentsAreSkipped) {
  TempDir dir("pgm_comment");
  const std::string path = dir.file("mask.pgm");
  std::string data = "P5 # binary gray\n# full header comment\n2 2\n255\n";
  data.push_back(static_cast<char>(200));
  data.push_back(static_cast<char>(10));
  data.push_back(static_cast<char>(0));
  data.push_back(static_cast<char>(255));
  write_text(path, data);
  const GrayImage img = read_pgm(path);
  EXPECT_EQ(img.width, 2);
  EXPECT_EQ(img.height, 2);
  EXPECT_EQ(img.pixels[0], 200);
}

TEST(PgmTest, MalformedFilesRaiseDataErrors) {
  TempDir dir("pgm_bad");
  const std::string path = dir.file("mask.pgm");
  write_text(path, "P2\n2 2\n255\n");
  EXPECT_THROW(read_pgm(path), DataError);
  write_text(path, "P5\n2 2\n65535\n");
  EXPECT_THROW(read_pgm(path), DataError);
  write_text(path, "P5\n2 2\n255\nab");  // 2 of 4 pixel bytes
  EXPECT_THROW(read_pgm(path), DataError);
}

TEST(PgmTest, MaskThresholdAt128) {
  GrayImage img;
  img.width = 2;
  img.height = 1;
  img.pixels = {127, 128};
  const RoiMask mask = mask_from_image(img);
  EXPECT_FALSE(mask.inside(0, 0));
  EXPECT_TRUE(mask.inside(1, 0));
}

TEST(MtmcFileTest, RoundTripAndGrouping) {
  TempDir dir("mtmc_roundtrip");
  const std::string path = dir.file("mtmc.txt");
  std::vector<MtmcRow> rows;
  rows.push_back({1, 10, 0, BoundingBox{5, 6, 7, 8}});
  rows.push_back({1, 10, 1, BoundingBox{6, 6, 7, 8}});
  rows.push_back({2, 10, 0, BoundingBox{50, 60, 7, 8}});
  rows.push_back({1, 11, 0, BoundingBox{100, 6, 7, 8}});
  write_mtmc_file(path, rows);
  const auto back = read_mtmc_file(path);
  ASSERT_EQ(back.size(), 4u);
  EXPECT_EQ(back[0].camera, 1);
  EXPECT_EQ(back[0].global_id, 10);
  EXPECT_EQ(back[0].frame, 0);
  EXPECT_DOUBLE_EQ(back[0].box.left, 5.0);

  const auto tracks = tracks_from_mtmc_rows(back, "test");
  ASSERT_EQ(tracks.size(), 3u);  // (1,10), (1,11), (2,10)
  EXPECT_EQ(tracks[0].camera_id, 1);
  EXPECT_EQ(tracks[0].track_id, 10);
  EXPECT_EQ(tracks[0].detections.size(), 2u);
}

TEST(MtmcFileTest, MalformedRowIsError) {
  TempDir dir("mtmc_bad");
  const std::string path = dir.file("mtmc.txt");
  write_text(path, "1 10 1 5 6 7\n");  // too few fields
  EXPECT_THROW(read_mtmc_file(path), DataError);
  write_text(path, "1 10 0 5 6 7 8 -1 -1\n");  // disk frame below 1
  EXPECT_THROW(read_mtmc_file(path), DataError);
}

}  // namespace
}  // namespace mctrack
