#include <gtest/gtest.h>

#include <cmath>

#include "oracle.hpp"
#include "posedyn/error.hpp"
#include "posedyn/gapsim.hpp"

using namespace posedyn;

namespace {

GapSimConfig small_config() {
  GapSimConfig c;
  c.n_samples = 1000;
  c.trials = 3;
  c.gap_multiples = {0.0, 1.0, 2.0};
  c.seed = 7;
  return c;
}

std::vector<double> linear_fill(std::vector<double> v, std::size_t start, std::size_t len) {
  const double a = v[start - 1], b = v[start + len];
  for (std::size_t k = 0; k < len; ++k)
    v[start + k] = a + (b - a) * static_cast<double>(k + 1) / static_cast<double>(len + 1);
  return v;
}

}  // namespace

TEST(GapSim, SignalIsDeterministicAndHasRequestedSnr) {
  GapSimConfig c;
  c.n_samples = 20000;
  const auto a = gap_sim_signal(c, 0), b = gap_sim_signal(c, 0), other = gap_sim_signal(c, 1);
  EXPECT_EQ(std::vector<double>(a.values().begin(), a.values().end()),
            std::vector<double>(b.values().begin(), b.values().end()));
  EXPECT_NE(a[10], other[10]);
  double ss = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double clean = std::sin(2.0 * M_PI * static_cast<double>(i) / 100.0);
    ss += (a[i] - clean) * (a[i] - clean);
  }
  const double noise_rms = std::sqrt(ss / static_cast<double>(a.size()));
  EXPECT_NEAR((1.0 / std::sqrt(2.0)) / noise_rms, 5.0, 0.15);
}

TEST(GapSim, TrialsMatchIndependentRecomputation) {
  const auto cfg = small_config();
  const auto res = run_gap_simulation(cfg);
  ASSERT_EQ(res.gaps.size(), 3u);
  ASSERT_EQ(res.baseline_rr.size(), 3u);
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    const auto s = gap_sim_signal(cfg, t);
    const std::vector<double> clean(s.values().begin(), s.values().end());
    const auto base = oracle::auto_recurrence(oracle::embed(clean, 3, 25), 25, 0.2);
    const auto eligible = [&](const oracle::Dense& r) {
      return r.size() * r.size() - (r.size() + 2 * (25 * r.size() - 25 * 26 / 2));
    };
    const auto bm = oracle::metrics(base.r, eligible(base.r), 2);
    EXPECT_NEAR(res.baseline_rr[t], bm.rr, 1e-12);
    EXPECT_NEAR(res.baseline_det[t], bm.det, 1e-12);
    for (const auto& g : res.gaps) {
      const std::size_t start = g.gap_start[t];
      if (g.length == 0) {
        EXPECT_EQ(g.rr[t], res.baseline_rr[t]);
        EXPECT_EQ(g.rr_error[t], 0.0);
        continue;
      }
      EXPECT_GE(start, 1u);
      EXPECT_LE(start + g.length, cfg.n_samples - 1);
      const auto filled = oracle::auto_recurrence(oracle::embed(linear_fill(clean, start, g.length), 3, 25), 25, 0.2);
      const auto fm = oracle::metrics(filled.r, eligible(filled.r), 2);
      EXPECT_NEAR(g.rr[t], fm.rr, 1e-9);
      EXPECT_NEAR(g.rr_error[t], 100.0 * std::abs(fm.rr - bm.rr) / bm.rr, 1e-6);
      EXPECT_NEAR(g.det_error[t], 100.0 * std::abs(fm.det - bm.det) / bm.det, 1e-6);
    }
  }
  for (const auto& g : res.gaps) {
    double mean = 0;
    for (double e : g.rr_error) mean += e;
    EXPECT_NEAR(g.rr_error_mean, mean / 3.0, 1e-12);
  }
  EXPECT_EQ(res.gaps[1].length, 25u);
  EXPECT_EQ(res.gaps[2].length, 50u);
}

TEST(GapSim, DifferenceMapsUseCenteredGap) {
  const auto res = run_gap_simulation(small_config());
  const auto& base = res.baseline_matrix;
  EXPECT_EQ(base.rows(), 950u);
  const auto& zero = res.gaps[0].difference;
  EXPECT_EQ(zero.count(CellChange::kUnchanged), zero.rows * zero.cols);
  const auto& d = res.gaps[2].difference;
  EXPECT_EQ(d.rows, base.rows());
  EXPECT_GT(d.count(CellChange::kLost) + d.count(CellChange::kGained), 0u);
  // far from the centered gap, nothing changes
  for (std::size_t i = 0; i < 100; ++i)
    for (std::size_t j = 0; j < 100; ++j) EXPECT_EQ(d.at(i, j), CellChange::kUnchanged);
}

TEST(GapSim, JobsAndSeed) {
  auto cfg = small_config();
  cfg.difference_maps = false;
  const auto one = run_gap_simulation(cfg);
  cfg.jobs = 3;
  const auto three = run_gap_simulation(cfg);
  for (std::size_t g = 0; g < one.gaps.size(); ++g) {
    EXPECT_EQ(one.gaps[g].rr, three.gaps[g].rr);
    EXPECT_EQ(one.gaps[g].gap_start, three.gaps[g].gap_start);
  }
  cfg.seed = 8;
  EXPECT_NE(run_gap_simulation(cfg).baseline_rr, one.baseline_rr);
}

TEST(GapSim, DifferenceMapCodes) {
  RecurrenceMatrix a(3, 3, RecurrenceMode::kAuto, 0), b(3, 3, RecurrenceMode::kAuto, 0);
  a.set(0, 1);
  b.set(0, 2);
  a.set(1, 2);
  b.set(1, 2);
  const auto d = difference_map(a, b);
  EXPECT_EQ(d.at(0, 1), CellChange::kLost);
  EXPECT_EQ(d.at(0, 2), CellChange::kGained);
  EXPECT_EQ(d.at(1, 2), CellChange::kUnchanged);
  EXPECT_THROW(difference_map(a, RecurrenceMatrix(2, 2, RecurrenceMode::kAuto, 0)), InputError);
}

TEST(GapSim, InvalidConfigs) {
  auto c = small_config();
  c.n_samples = 500;
  EXPECT_THROW(run_gap_simulation(c), InputError);
  c = small_config();
  c.trials = 0;
  EXPECT_THROW(run_gap_simulation(c), InputError);
  c = small_config();
  c.gap_multiples = {50.0};
  EXPECT_THROW(run_gap_simulation(c), InputError);
  c = small_config();
  c.snr = 0.0;
  EXPECT_THROW(run_gap_simulation(c), InputError);
}
