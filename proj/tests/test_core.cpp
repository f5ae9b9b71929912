#include <gtest/gtest.h>

#include <random>

#include "posedyn/core.hpp"
#include "posedyn/error.hpp"

using namespace posedyn;

TEST(Series, MaskAndSlice) {
  Series s({1, 2, 3, 4, 5}, 10.0);
  EXPECT_TRUE(s.all_valid());
  s.invalidate(2);
  EXPECT_EQ(s.count_valid(), 4u);
  const Series t = s.slice(1, 4);
  ASSERT_EQ(t.size(), 3u);
  EXPECT_FALSE(t.valid(1));
  EXPECT_DOUBLE_EQ(t[2], 4.0);
  EXPECT_DOUBLE_EQ(t.rate(), 10.0);
  EXPECT_DOUBLE_EQ(s.base().time_of(5), 0.5);
  s.set(2, 9.0);
  EXPECT_TRUE(s.valid(2));
  const Series r = s.reversed();
  EXPECT_DOUBLE_EQ(r[0], 5.0);
}

TEST(PoseSequence, AxisSeriesRoundTrip) {
  PoseSequence p(4, 2, 3, 30.0, {"nose", "chin"});
  for (std::size_t f = 0; f < 4; ++f)
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t d = 0; d < 3; ++d) p.coord(f, k, d) = 100.0 * f + 10.0 * k + d;
  p.set_valid(2, 1, false);
  EXPECT_DOUBLE_EQ(p.confidence(0, 0), 1.0);
  EXPECT_EQ(p.keypoint_index("chin"), 1u);
  EXPECT_THROW(p.keypoint_index("ear"), InputError);

  Series z = p.axis_series(1, 2);
  EXPECT_FALSE(z.valid(2));
  EXPECT_DOUBLE_EQ(z[3], 312.0);
  z.set(2, -1.0);
  p.set_axis_series(1, 2, z);
  EXPECT_TRUE(p.valid(2, 1));
  EXPECT_DOUBLE_EQ(p.coord(2, 1, 2), -1.0);

  const PoseSequence s = p.slice_frames(1, 3);
  EXPECT_EQ(s.frames(), 2u);
  EXPECT_DOUBLE_EQ(s.coord(0, 0, 0), 100.0);
}

TEST(PoseSequence, RejectsBadShape) {
  EXPECT_THROW(PoseSequence(2, 2, 4, 30.0), InputError);
  EXPECT_THROW(PoseSequence(2, 2, 2, 30.0, {"a", "a"}), InputError);
  EXPECT_THROW(PoseSequence(2, 2, 2, 0.0), InputError);
}

TEST(Windows, CaseTwoGeometry) {
  const auto w = make_windows(28800, {3600, 0.5});
  ASSERT_EQ(w.size(), 15u);
  EXPECT_EQ(w.front().begin, 0u);
  EXPECT_EQ(w.back().begin, 14u * 1800u);
  EXPECT_EQ(w.back().end, 28800u);
}

TEST(Windows, MatchClosedForm) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t len = std::uniform_int_distribution<std::size_t>(2, 500)(rng);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(len, 5000)(rng);
    const double ov = std::uniform_real_distribution<double>(0.0, 0.95)(rng);
    const auto step = static_cast<std::size_t>(std::llround(static_cast<double>(len) * (1.0 - ov)));
    if (step == 0) continue;
    const auto w = make_windows(n, {len, ov});
    ASSERT_EQ(w.size(), (n - len) / step + 1);
    for (std::size_t k = 0; k < w.size(); ++k) {
      EXPECT_EQ(w[k].begin, k * step);
      EXPECT_EQ(w[k].size(), len);
    }
  }
}

TEST(Windows, ShortInputNamesMinimum) {
  try {
    make_windows(100, {3600, 0.5});
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("3600"), std::string::npos);
  }
  EXPECT_THROW(make_windows(10, {5, 1.0}), InputError);
  EXPECT_THROW(make_windows(10, {1, 0.0}), InputError);
}

TEST(Windows, ParseSpec) {
  const auto w = parse_window_spec("3600,0.5");
  EXPECT_EQ(w.length, 3600u);
  EXPECT_DOUBLE_EQ(w.overlap, 0.5);
  EXPECT_EQ(w.step(), 1800u);
  EXPECT_THROW(parse_window_spec("abc"), InputError);
}
