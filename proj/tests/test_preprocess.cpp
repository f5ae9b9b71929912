#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "posedyn/error.hpp"
#include "posedyn/preprocess.hpp"
#include "support.hpp"

using namespace posedyn;
using testing_support::sine;

namespace {

// Analytic |H|^2 of an order-N digital Butterworth obtained by the bilinear
// transform with pre-warping.
double butterworth_gain2(double f, double fc, double fs, int order) {
  const double r = std::tan(std::numbers::pi * f / fs) / std::tan(std::numbers::pi * fc / fs);
  return 1.0 / (1.0 + std::pow(r, 2 * order));
}

double peak_amplitude(const Series& s, std::size_t from, std::size_t to) {
  double m = 0.0;
  for (std::size_t i = from; i < to; ++i) m = std::max(m, std::abs(s[i]));
  return m;
}

}  // namespace

TEST(ConfidenceMask, ThresholdSemantics) {
  PoseSequence p(3, 2, 2, 60.0);
  p.confidence(0, 0) = 0.1;
  p.confidence(1, 1) = 0.3;
  p.confidence(2, 0) = 0.99;
  const auto a = mask_low_confidence(p, 0.30);
  EXPECT_FALSE(a.valid(0, 0));
  EXPECT_TRUE(a.valid(1, 1));  // equal to threshold is kept
  EXPECT_TRUE(a.valid(2, 0));
  EXPECT_EQ(mask_low_confidence(p, 0.0), p);
  const auto b = mask_low_confidence(p, 1.0);
  std::size_t masked = 0;
  for (std::size_t f = 0; f < 3; ++f)
    for (std::size_t k = 0; k < 2; ++k) masked += b.valid(f, k) ? 0 : 1;
  EXPECT_EQ(masked, 3u);
}

TEST(GapFill, LinearClosedForm) {
  Series s({0, 9, 9, 9, 4}, 1.0);
  for (std::size_t i = 1; i <= 3; ++i) s.invalidate(i);
  const auto r = interpolate_gaps(s, GapPolicy{3});
  for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(r.series[i], static_cast<double>(i));
  ASSERT_EQ(r.gaps.size(), 1u);
  EXPECT_EQ(r.gaps[0].start, 1u);
  EXPECT_EQ(r.gaps[0].length, 3u);
  EXPECT_TRUE(r.gaps[0].filled);
}

TEST(GapFill, LimitFromEmbedding) {
  const auto policy = GapPolicy::from_embedding(3, 25);
  EXPECT_EQ(policy.max_gap, 50u);
  for (std::size_t len : {50u, 51u}) {
    Series s = sine(400, 100.0, 1.0);
    for (std::size_t i = 100; i < 100 + len; ++i) s.invalidate(i);
    const auto r = interpolate_gaps(s, policy);
    EXPECT_EQ(r.series.all_valid(), len == 50) << len;
  }
}

TEST(GapFill, EdgesStayMaskedAndValidSamplesUntouched) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Series s = testing_support::noise(200, rng);
    std::bernoulli_distribution drop(0.2);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (drop(rng)) s.invalidate(i);
    s.invalidate(0);
    const std::size_t max_gap = trial % 5;
    const auto r = interpolate_gaps(s, GapPolicy{max_gap});
    EXPECT_FALSE(r.series.valid(0));
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s.valid(i)) {
        EXPECT_TRUE(r.series.valid(i));
        EXPECT_EQ(r.series[i], s[i]);
      }
    for (const auto& g : r.gaps) {
      if (g.filled) EXPECT_LE(g.length, max_gap);
      if (g.edge) EXPECT_FALSE(g.filled);
    }
  }
  Series one({1.0, 2.0}, 1.0);
  one.invalidate(1);
  EXPECT_THROW(interpolate_gaps(one, GapPolicy{5}), InputError);
}

TEST(Butterworth, MatchesAnalyticMagnitude) {
  for (int order : {2, 4, 6}) {
    const FilterSpec spec{order, 10.0};
    const auto sections = design_butterworth_lowpass(spec, 60.0);
    for (double f : {0.0, 1.0, 5.0, 10.0, 15.0, 25.0, 29.0})
      EXPECT_NEAR(magnitude_response_squared(sections, f, 60.0), butterworth_gain2(f, 10.0, 60.0, order), 1e-12);
  }
  EXPECT_THROW(design_butterworth_lowpass({4, 30.0}, 60.0), InputError);
  EXPECT_THROW(design_butterworth_lowpass({3, 10.0}, 60.0), InputError);
}

TEST(ZeroPhaseFilter, PassAndStopBands) {
  const FilterSpec spec{4, 10.0};
  // Zero-phase gain is |H|^2.
  ASSERT_NEAR(butterworth_gain2(1.0, 10.0, 60.0, 4), 1.0, 0.01);
  ASSERT_LT(butterworth_gain2(25.0, 10.0, 60.0, 4), 0.02);
  const auto low = lowpass_zero_phase(sine(1200, 60.0, 1.0), spec);
  EXPECT_NEAR(peak_amplitude(low, 200, 1000), 1.0, 0.01);
  const auto high = lowpass_zero_phase(sine(1200, 60.0, 1.0 / 25.0), spec);
  EXPECT_LT(peak_amplitude(high, 200, 1000), 0.02);
}

TEST(ZeroPhaseFilter, ConstantAndNoShift) {
  const auto c = lowpass_zero_phase(Series(std::vector<double>(300, 4.2), 60.0), {4, 10.0});
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c[i], 4.2, 1e-9);
  // A slow sine keeps its zero crossings where they were.
  const auto s = sine(1200, 60.0, 1.0);
  const auto f = lowpass_zero_phase(s, {4, 10.0});
  for (std::size_t i = 300; i < 900; i += 30) EXPECT_NEAR(f[i], 0.0, 1e-3);
}

TEST(ZeroPhaseFilter, ReversalSymmetry) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Series s = testing_support::noise(500 + 37 * trial, rng, 1.0, 60.0);
    const auto a = lowpass_zero_phase(s.reversed(), {4, 10.0});
    const auto b = lowpass_zero_phase(s, {4, 10.0}).reversed();
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
  }
}

TEST(ZeroPhaseFilter, GapsAreReinstated) {
  Series s = sine(600, 60.0, 1.0);
  for (std::size_t i = 200; i < 230; ++i) s.invalidate(i);
  EXPECT_THROW(lowpass_zero_phase(s, {4, 10.0}), InputError);
  const auto f = lowpass_with_gaps(s, {4, 10.0});
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(f.valid(i), s.valid(i));
  EXPECT_NEAR(f[100], s[100], 0.01);
}

TEST(Resample, DecimateCaseTwo) {
  const auto s = sine(3600, 60.0, 1.0);
  const auto d = resample(s, 30.0, ResampleMethod::kDecimate);
  EXPECT_EQ(d.size(), 1800u);
  EXPECT_DOUBLE_EQ(d.rate(), 30.0);
  EXPECT_EQ(d[7], s[14]);
  EXPECT_THROW(resample(s, 25.0, ResampleMethod::kDecimate), InputError);
  const auto same = resample(s, 60.0, ResampleMethod::kCubic);
  EXPECT_EQ(same.size(), s.size());
}

TEST(Resample, CubicReproducesLines) {
  std::vector<double> v(601);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 3.0 - 0.25 * static_cast<double>(i) / 60.0;
  const auto r = resample(Series(v, 60.0), 30.0, ResampleMethod::kCubic);
  ASSERT_EQ(r.size(), 301u);
  for (std::size_t k = 0; k < r.size(); ++k) EXPECT_NEAR(r[k], 3.0 - 0.25 * static_cast<double>(k) / 30.0, 1e-12);
  // Non-integer ratio keeps the first sample time and the grid.
  const auto u = resample(Series(v, 60.0), 50.0, ResampleMethod::kCubic);
  EXPECT_EQ(u.size(), 501u);
  EXPECT_NEAR(u[0], 3.0, 1e-12);
  EXPECT_NEAR(u[100], 3.0 - 0.25 * 2.0, 1e-12);
}

TEST(Normalize, ZScoreAndUnitInterval) {
  std::mt19937_64 rng(4);
  Series s = testing_support::noise(300, rng, 7.0);
  s.invalidate(10);
  const auto z = normalize(s, NormalizeMode::kZScore);
  double mean = 0.0, ss = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < z.size(); ++i)
    if (z.valid(i)) {
      mean += z[i];
      ++n;
    }
  mean /= static_cast<double>(n);
  for (std::size_t i = 0; i < z.size(); ++i)
    if (z.valid(i)) ss += (z[i] - mean) * (z[i] - mean);
  EXPECT_NEAR(mean, 0.0, 1e-9);
  EXPECT_NEAR(std::sqrt(ss / static_cast<double>(n)), 1.0, 1e-9);
  EXPECT_FALSE(z.valid(10));

  const auto zz = normalize(z, NormalizeMode::kZScore);
  for (std::size_t i = 0; i < z.size(); ++i)
    if (z.valid(i)) EXPECT_NEAR(zz[i], z[i], 1e-9);

  const auto u = normalize(Series({0.0, 10.0}, 1.0), NormalizeMode::kUnitInterval);
  EXPECT_DOUBLE_EQ(u[0], 0.0);
  EXPECT_DOUBLE_EQ(u[1], 1.0);
  EXPECT_THROW(normalize(Series({2.0, 2.0, 2.0}, 1.0), NormalizeMode::kZScore), DegenerateInputError);
  EXPECT_THROW(normalize(Series({2.0, 2.0}, 1.0), NormalizeMode::kUnitInterval), DegenerateInputError);
}

TEST(Normalize, WindowScopeOnDrift) {
  std::vector<double> v(1000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.01 * static_cast<double>(i) + std::sin(0.3 * static_cast<double>(i));
  const auto w = normalize_windows(Series(v, 1.0), NormalizeMode::kZScore, {200, 0.5});
  ASSERT_EQ(w.size(), 9u);
  for (const auto& s : w) {
    double m = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) m += s[i];
    EXPECT_NEAR(m / static_cast<double>(s.size()), 0.0, 1e-9);
  }
}

TEST(Detrend, LinesAndSines) {
  std::vector<double> line(100), mixed(100);
  for (std::size_t i = 0; i < 100; ++i) {
    line[i] = 2.0 + 0.5 * static_cast<double>(i);
    mixed[i] = line[i] + std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / 20.0);
  }
  const auto a = detrend(Series(line, 1.0));
  for (std::size_t i = 0; i < 100; ++i) EXPECT_NEAR(a[i], 0.0, 1e-9);
  // Five whole periods: the sine is orthogonal to a line only approximately,
  // so compare against the sine minus its own least-squares line.
  const auto b = detrend(Series(mixed, 1.0));
  std::vector<double> pure(100);
  for (std::size_t i = 0; i < 100; ++i) pure[i] = std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / 20.0);
  const auto c = detrend(Series(pure, 1.0));
  for (std::size_t i = 0; i < 100; ++i) EXPECT_NEAR(b[i], c[i], 1e-6);
  const auto k = detrend(Series(std::vector<double>(10, 3.0), 1.0));
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(k[i], 0.0, 1e-12);
}

TEST(Parsing, Modes) {
  EXPECT_EQ(parse_normalize_mode("zscore"), NormalizeMode::kZScore);
  EXPECT_EQ(parse_normalize_mode("unit"), NormalizeMode::kUnitInterval);
  EXPECT_EQ(parse_resample_method("decimate"), ResampleMethod::kDecimate);
  EXPECT_THROW(parse_normalize_mode("minmax"), InputError);
}
