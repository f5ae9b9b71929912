#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "posedyn/error.hpp"
#include "posedyn/io.hpp"
#include "support.hpp"

using namespace posedyn;
using testing_support::TempDir;

namespace {

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

std::vector<std::string> lines_of(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

PoseLoadOptions csv(double rate) {
  PoseLoadOptions o;
  o.rate = rate;
  return o;
}

}  // namespace

TEST(PoseCsv, ThreeDimensionalRoundTrip) {
  TempDir dir;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  PoseSequence p(2, 3, 3, 30.0, {"head", "l wrist", "r,wrist"});
  for (std::size_t f = 0; f < 2; ++f)
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t d = 0; d < 3; ++d) p.coord(f, k, d) = u(rng);
      p.confidence(f, k) = 0.25 * static_cast<double>(k + f);
    }
  p.set_valid(1, 2, false);
  // Masked coordinates are not stored, so compare against zeros there.
  for (std::size_t d = 0; d < 3; ++d) p.coord(1, 2, d) = 0.0;

  write_pose_csv(p, dir / "p.csv");
  const auto q = load_pose(dir / "p.csv", csv(30.0));
  EXPECT_EQ(q.dims(), 3u);
  EXPECT_EQ(q, p);
}

TEST(PoseCsv, MissingFramesAreMasked) {
  TempDir dir;
  write(dir / "p.csv",
        "frame,keypoint,x,y,confidence\n"
        "10,a,1,2,0.9\n10,b,3,4,0.8\n"
        "12,a,5,6,0.7\n12,b,,,0.0\n");
  const auto p = load_pose(dir / "p.csv", csv(60.0));
  ASSERT_EQ(p.frames(), 3u);
  EXPECT_EQ(p.dims(), 2u);
  EXPECT_TRUE(p.valid(0, 0));
  EXPECT_FALSE(p.valid(1, 0));
  EXPECT_FALSE(p.valid(1, 1));
  EXPECT_FALSE(p.valid(2, 1));
  EXPECT_DOUBLE_EQ(p.coord(2, 0, 1), 6.0);
  EXPECT_DOUBLE_EQ(p.confidence(0, 1), 0.8);
}

TEST(PoseCsv, ConfidenceDefaultsToOne) {
  TempDir dir;
  write(dir / "p.csv", "frame,keypoint,x,y\n0,a,1,2\n");
  EXPECT_DOUBLE_EQ(load_pose(dir / "p.csv", csv(1.0)).confidence(0, 0), 1.0);
}

TEST(PoseCsv, MalformedRowReportsLine) {
  TempDir dir;
  write(dir / "p.csv", "frame,keypoint,x,y\n0,a,1,2\n1,a,oops,2\n");
  try {
    load_pose(dir / "p.csv", csv(1.0));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  write(dir / "q.csv", "frame,keypoint,x,y\n0,a,1\n");
  EXPECT_THROW(load_pose(dir / "q.csv", csv(1.0)), ParseError);
}

TEST(PoseCsv, EmptyFileIsAnError) {
  TempDir dir;
  write(dir / "e.csv", "");
  EXPECT_THROW(load_pose(dir / "e.csv", csv(1.0)), InputError);
  write(dir / "h.csv", "frame,keypoint,x,y\n");
  EXPECT_THROW(load_pose(dir / "h.csv", csv(1.0)), InputError);
  EXPECT_THROW(load_pose(dir / "e.csv", csv(0.0)), InputError);
}

TEST(PoseJson, FaceFramesAndMissingPerson) {
  TempDir dir;
  std::string doc = "[";
  for (int f = 0; f < 3; ++f) {
    if (f) doc += ",";
    if (f == 1) {
      doc += R"({"people": []})";
      continue;
    }
    doc += R"({"people": [{"face_keypoints_2d": [)";
    for (int k = 0; k < 70; ++k) doc += (k ? "," : "") + std::to_string(k) + "," + std::to_string(f) + ",0.9";
    doc += "]}]}";
  }
  doc += "]";
  write(dir / "face.json", doc);
  PoseLoadOptions o;
  o.format = PoseFormat::kPoseJson;
  o.rate = 60.0;
  o.keypoint_field = "face_keypoints_2d";
  const auto p = load_pose(dir / "face.json", o);
  EXPECT_EQ(p.frames(), 3u);
  EXPECT_EQ(p.keypoints(), 70u);
  EXPECT_EQ(p.dims(), 2u);
  EXPECT_DOUBLE_EQ(p.rate(), 60.0);
  EXPECT_DOUBLE_EQ(p.coord(2, 69, 0), 69.0);
  EXPECT_DOUBLE_EQ(p.coord(2, 69, 1), 2.0);
  for (std::size_t k = 0; k < 70; ++k) EXPECT_FALSE(p.valid(1, k));
}

TEST(PoseJson, PerFrameDirectoryAndPersonIndex) {
  TempDir dir;
  std::filesystem::create_directories(dir / "frames");
  write(dir / "frames" / "f_000.json",
        R"({"people": [{"pose_keypoints_2d": [1,1,1, 2,2,1]}, {"pose_keypoints_2d": [5,5,1, 6,6,1]}]})");
  write(dir / "frames" / "f_001.json", R"({"people": [{"pose_keypoints_2d": [1,2,1, 2,3,1]}]})");
  PoseLoadOptions o;
  o.format = PoseFormat::kPoseJson;
  o.rate = 25.0;
  o.person = 1;
  const auto p = load_pose(dir / "frames", o);
  EXPECT_EQ(p.frames(), 2u);
  EXPECT_DOUBLE_EQ(p.coord(0, 1, 0), 6.0);
  EXPECT_FALSE(p.valid(1, 0));
}

TEST(PoseJson, InconsistentKeypointCountNamesFrame) {
  TempDir dir;
  write(dir / "bad.json",
        R"([{"people": [{"pose_keypoints_2d": [1,1,1]}]}, {"people": [{"pose_keypoints_2d": [1,1,1,2,2,1]}]}])");
  PoseLoadOptions o;
  o.format = PoseFormat::kPoseJson;
  o.rate = 25.0;
  try {
    load_pose(dir / "bad.json", o);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("frame 1"), std::string::npos);
  }
  write(dir / "odd.json", R"([{"people": [{"pose_keypoints_2d": [1,1]}]}])");
  EXPECT_THROW(load_pose(dir / "odd.json", o), InputError);
}

TEST(MetricsCsv, RowsHeaderAndFormatting) {
  TempDir dir;
  Table t;
  t.columns = {"window_start", "name", "value", "missing"};
  t.add_row({std::int64_t{0}, std::string("a,b"), 1.0 / 3.0, std::monostate{}});
  t.add_row({std::int64_t{1800}, std::string("say \"hi\""), 123456789012.0, 2.5});
  write_metrics_csv(t, dir / "m.csv");
  const auto l = lines_of(dir / "m.csv");
  ASSERT_EQ(l.size(), 3u);
  EXPECT_EQ(l[0], "window_start,name,value,missing");
  EXPECT_EQ(l[1], "0,\"a,b\",0.333333333,");
  EXPECT_EQ(l[2], "1800,\"say \"\"hi\"\"\",1.23456789e+11,2.5");
  EXPECT_THROW(t.add_row({1.0}), InputError);
}

TEST(MetricsCsv, EmptyTableIsHeaderOnly) {
  TempDir dir;
  Table t;
  t.columns = {"a", "b"};
  write_metrics_csv(t, dir / "m.csv");
  EXPECT_EQ(lines_of(dir / "m.csv"), std::vector<std::string>{"a,b"});
}

TEST(MetricsCsv, UnwritablePath) {
  TempDir dir;
  write(dir / "file", "x");
  Table t;
  t.columns = {"a"};
  EXPECT_THROW(write_metrics_csv(t, dir / "file" / "sub" / "m.csv"), IoError);
}

TEST(SeriesCsv, RoundTripIsExact) {
  TempDir dir;
  std::mt19937_64 rng(5);
  auto a = testing_support::noise(50, rng, 1e-3, 30.0);
  auto b = testing_support::noise(50, rng, 1e6, 30.0);
  a.invalidate(4);
  write_series_csv({"a", "b"}, {a, b}, dir / "s.csv");
  const auto r = read_series_csv(dir / "s.csv", 30.0);
  ASSERT_EQ(r.names, (std::vector<std::string>{"a", "b"}));
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(r.series[0].valid(i), a.valid(i));
    if (a.valid(i)) EXPECT_EQ(r.series[0][i], a[i]);
    EXPECT_EQ(r.series[1][i], b[i]);
  }
}

TEST(Pgm, RowZeroAtBottom) {
  TempDir dir;
  RecurrenceMatrix r(3, 3, RecurrenceMode::kCross, 0);
  for (std::size_t i = 0; i < 3; ++i) r.set(i, i);
  r.set(0, 2);
  write_matrix_pgm(r, dir / "r.pgm");
  const auto img = read_pgm(dir / "r.pgm");
  ASSERT_EQ(img.width, 3u);
  ASSERT_EQ(img.height, 3u);
  // Raster top row is matrix row 2.
  const std::vector<std::uint8_t> expected{0, 0, 255, 0, 255, 0, 255, 0, 255};
  EXPECT_EQ(img.pixels, expected);
  EXPECT_THROW(write_matrix_pgm(RecurrenceMatrix(), dir / "e.pgm"), InputError);
}

TEST(Pgm, DifferenceMapLevels) {
  TempDir dir;
  DifferenceMap d{2, 2, {CellChange::kUnchanged, CellChange::kLost, CellChange::kGained, CellChange::kUnchanged}};
  write_difference_pgm(d, dir / "d.pgm");
  const auto img = read_pgm(dir / "d.pgm");
  EXPECT_EQ(img.pixels, (std::vector<std::uint8_t>{255, 0, 0, 128}));
}
