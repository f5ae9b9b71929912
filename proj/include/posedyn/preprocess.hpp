#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "posedyn/core.hpp"

namespace posedyn {

/// Masks every (frame, keypoint) whose confidence is below `threshold`.
PoseSequence mask_low_confidence(const PoseSequence& p, double threshold);

struct GapPolicy {
  std::size_t max_gap = 0;  // typically (m - 1) * tau

  static GapPolicy from_embedding(std::size_t m, std::size_t tau) { return {(m - 1) * tau}; }
};

struct GapRecord {
  std::size_t start = 0;
  std::size_t length = 0;
  bool filled = false;
  bool edge = false;  // leading or trailing gap; never filled
};

struct GapFillResult {
  Series series;
  std::vector<GapRecord> gaps;
};

/// Linearly fills interior gaps of at most policy.max_gap samples.
GapFillResult interpolate_gaps(const Series& s, const GapPolicy& policy);

struct FilterSpec {
  int order = 4;        // even; doubled by the forward-backward pass
  double cutoff = 10.0; // Hz
};

/// Butterworth low-pass as cascaded biquads (bilinear transform with
/// pre-warping).
struct Biquad {
  double b0, b1, b2, a1, a2;
};
std::vector<Biquad> design_butterworth_lowpass(const FilterSpec& spec, double rate);

/// |H(e^{jw})|^2 of the designed cascade at frequency `hz`.
double magnitude_response_squared(const std::vector<Biquad>& sections, double hz, double rate);

/// Forward-backward filtering with odd reflective padding and steady-state
/// initial conditions. Requires a fully valid series.
Series lowpass_zero_phase(const Series& s, const FilterSpec& spec);

/// Fills every interior gap for filtering, then restores the original mask.
Series lowpass_with_gaps(const Series& s, const FilterSpec& spec);

enum class ResampleMethod { kCubic, kDecimate };

/// Resamples onto k / new_rate for every k with k / new_rate <= last sample
/// time. Cubic uses a natural spline per contiguous valid run; decimate keeps
/// every (rate / new_rate)-th sample and requires an integer ratio.
Series resample(const Series& s, double new_rate, ResampleMethod method);

enum class NormalizeMode { kNone, kZScore, kUnitInterval };
enum class NormalizeScope { kTrial, kWindow };

struct NormalizationSpec {
  NormalizeMode mode = NormalizeMode::kZScore;
  NormalizeScope scope = NormalizeScope::kTrial;
};

/// Parameters come from valid samples only; masked samples stay masked.
/// Throws DegenerateInputError for constant input.
Series normalize(const Series& s, NormalizeMode mode);

/// Window-scoped normalization: each window is normalized independently.
std::vector<Series> normalize_windows(const Series& s, NormalizeMode mode, const WindowSpec& windows);

/// Subtracts the least-squares line fitted over valid samples.
Series detrend(const Series& s);

NormalizeMode parse_normalize_mode(const std::string& text);
ResampleMethod parse_resample_method(const std::string& text);

}  // namespace posedyn
