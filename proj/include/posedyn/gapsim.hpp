#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "posedyn/recurrence.hpp"

namespace posedyn {

struct GapSimConfig {
  double rate = 100.0;     // Hz
  double period = 1.0;     // s
  double snr = 5.0;        // RMS amplitude ratio of sine to Gaussian noise
  std::size_t n_samples = 3000;
  std::size_t m = 3;
  std::size_t tau = 25;
  std::vector<double> gap_multiples{0.5, 1.0, 1.5, 2.0, 3.0, 4.0};  // in units of tau
  std::size_t trials = 30;
  std::uint64_t seed = 1;
  double epsilon = 0.2;    // mean-rescaled radius
  std::size_t theiler = 25;
  std::size_t l_min = 2;
  bool difference_maps = true;
  std::size_t jobs = 1;
};

struct GapLengthResult {
  double multiple = 0.0;
  std::size_t length = 0;  // samples
  double rr_error_mean = 0.0, rr_error_sd = 0.0;    // percent
  double det_error_mean = 0.0, det_error_sd = 0.0;  // percent
  std::vector<double> rr_error, det_error;          // per trial
  std::vector<double> rr, det;                      // gapped metrics per trial
  std::vector<std::size_t> gap_start;               // per trial
  DifferenceMap difference;                         // centered gap on trial 0
};

struct GapSimResult {
  GapSimConfig config;
  std::vector<double> baseline_rr, baseline_det;  // per trial
  std::vector<GapLengthResult> gaps;
  RecurrenceMatrix baseline_matrix;               // trial 0
};

/// Noisy sine, gap injection, linear interpolation and RQA error curves.
GapSimResult run_gap_simulation(const GapSimConfig& cfg);

/// Cellwise unchanged / lost / gained codes of gapped relative to baseline.
DifferenceMap difference_map(const RecurrenceMatrix& baseline, const RecurrenceMatrix& gapped);

/// One noisy-sine realization for a trial (deterministic in seed and trial).
Series gap_sim_signal(const GapSimConfig& cfg, std::size_t trial);

}  // namespace posedyn
