#include "posedyn/gapsim.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "posedyn/error.hpp"
#include "posedyn/parallel.hpp"
#include "posedyn/preprocess.hpp"

namespace posedyn {

namespace {

std::mt19937_64 trial_rng(std::uint64_t seed, std::size_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial)};
  return std::mt19937_64(seq);
}

RecurrenceMatrix gap_rqa_matrix(const Series& s, const GapSimConfig& cfg) {
  RecurrenceConfig rc;
  rc.mode = RecurrenceMode::kAuto;
  rc.threshold = Threshold::fixed(cfg.epsilon);
  rc.rescale = Rescale::kMean;
  rc.theiler = cfg.theiler;
  rc.l_min = cfg.l_min;
  return build_matrix(delay_embed(s, cfg.m, cfg.tau), rc);
}

Series cut_and_fill(const Series& s, std::size_t start, std::size_t length) {
  if (length == 0) return s;
  Series gapped = s;
  for (std::size_t i = start; i < start + length; ++i) gapped.invalidate(i);
  return interpolate_gaps(gapped, GapPolicy{length}).series;
}

double relative_error(double value, double baseline) {
  return baseline == 0.0 ? 0.0 : 100.0 * std::abs(value - baseline) / baseline;
}

void mean_sd(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}

struct TrialOutcome {
  double base_rr = 0.0, base_det = 0.0;
  std::vector<double> rr, det;
  std::vector<std::size_t> start;
};

}  // namespace

Series gap_sim_signal(const GapSimConfig& cfg, std::size_t trial) {
  auto rng = trial_rng(cfg.seed, trial);
  std::normal_distribution<double> noise(0.0, (1.0 / std::numbers::sqrt2) / cfg.snr);
  std::vector<double> v(cfg.n_samples);
  const double w = 2.0 * std::numbers::pi / (cfg.period * cfg.rate);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(w * static_cast<double>(i)) + noise(rng);
  return Series(std::move(v), cfg.rate);
}

DifferenceMap difference_map(const RecurrenceMatrix& baseline, const RecurrenceMatrix& gapped) {
  if (baseline.rows() != gapped.rows() || baseline.cols() != gapped.cols())
    throw InputError("difference map needs matrices of equal shape");
  DifferenceMap out{baseline.rows(), baseline.cols(), std::vector<CellChange>(baseline.rows() * baseline.cols())};
  for (std::size_t i = 0; i < out.rows; ++i)
    for (std::size_t j = 0; j < out.cols; ++j) {
      const bool b = baseline.test(i, j), g = gapped.test(i, j);
      out.cells[i * out.cols + j] = b == g ? CellChange::kUnchanged : (b ? CellChange::kLost : CellChange::kGained);
    }
  return out;
}

GapSimResult run_gap_simulation(const GapSimConfig& cfg) {
  if (!(cfg.rate > 0.0) || !(cfg.period > 0.0) || !(cfg.snr > 0.0)) throw InputError("invalid signal parameters");
  if (static_cast<double>(cfg.n_samples) < 10.0 * cfg.period * cfg.rate)
    throw InputError("gap simulation needs at least 10 periods of signal");
  if (cfg.trials == 0) throw InputError("gap simulation needs at least one trial");

  std::vector<std::size_t> lengths;
  for (double mult : cfg.gap_multiples) {
    if (!(mult >= 0.0)) throw InputError("gap multiples must be non-negative");
    const auto len = static_cast<std::size_t>(std::llround(mult * static_cast<double>(cfg.tau)));
    if (len + 2 > cfg.n_samples) throw InputError("gap longer than the signal");
    lengths.push_back(len);
  }

  const auto outcomes = parallel_map(cfg.trials, cfg.jobs, [&](std::size_t trial) {
    const Series signal = gap_sim_signal(cfg, trial);
    // Gap positions come from a stream independent of the noise draw.
    auto rng = trial_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL, trial);
    TrialOutcome t;
    const auto base = compute_metrics(gap_rqa_matrix(signal, cfg), cfg.l_min);
    t.base_rr = base.rr;
    t.base_det = base.det;
    for (std::size_t len : lengths) {
      // Fully interior: at least one genuine sample on each side.
      std::uniform_int_distribution<std::size_t> pos(1, cfg.n_samples - len - 1);
      const std::size_t start = len == 0 ? 0 : pos(rng);
      const auto gm = compute_metrics(gap_rqa_matrix(cut_and_fill(signal, start, len), cfg), cfg.l_min);
      t.rr.push_back(gm.rr);
      t.det.push_back(gm.det);
      t.start.push_back(start);
    }
    return t;
  });

  GapSimResult result;
  result.config = cfg;
  for (const auto& t : outcomes) {
    result.baseline_rr.push_back(t.base_rr);
    result.baseline_det.push_back(t.base_det);
  }
  for (std::size_t g = 0; g < lengths.size(); ++g) {
    GapLengthResult gl;
    gl.multiple = cfg.gap_multiples[g];
    gl.length = lengths[g];
    for (const auto& t : outcomes) {
      gl.rr.push_back(t.rr[g]);
      gl.det.push_back(t.det[g]);
      gl.gap_start.push_back(t.start[g]);
      gl.rr_error.push_back(relative_error(t.rr[g], t.base_rr));
      gl.det_error.push_back(relative_error(t.det[g], t.base_det));
    }
    mean_sd(gl.rr_error, gl.rr_error_mean, gl.rr_error_sd);
    mean_sd(gl.det_error, gl.det_error_mean, gl.det_error_sd);
    result.gaps.push_back(std::move(gl));
  }

  if (cfg.difference_maps) {
    const Series signal = gap_sim_signal(cfg, 0);
    result.baseline_matrix = gap_rqa_matrix(signal, cfg);
    auto maps = parallel_map(lengths.size(), cfg.jobs, [&](std::size_t g) {
      const std::size_t start = (cfg.n_samples - lengths[g]) / 2;
      return difference_map(result.baseline_matrix, gap_rqa_matrix(cut_and_fill(signal, start, lengths[g]), cfg));
    });
    for (std::size_t g = 0; g < lengths.size(); ++g) result.gaps[g].difference = std::move(maps[g]);
  }
  return result;
}

}  // namespace posedyn
