#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "posedyn/core.hpp"

namespace posedyn {

enum class FeatureKind { kRawCoord, kMagnitude, kAperture, kDistance, kCentroidMagnitude };

/// Declarative feature definition.
///  raw_coord:          keypoints = {k}, axis required
///  magnitude:          keypoints = {k}; frame-to-frame displacement norm
///  aperture:           pairs of keypoints; per-frame distance averaged over pairs
///  distance:           set_a / set_b; distance between the two set centroids
///  centroid_magnitude: keypoints = ROI; speed of the ROI centroid
struct FeatureDef {
  std::string name;
  FeatureKind kind = FeatureKind::kMagnitude;
  std::vector<std::size_t> keypoints;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::size_t> set_a, set_b;
  std::optional<std::size_t> axis;

  /// Throws InputError when a referenced keypoint or axis does not exist.
  void validate(const PoseSequence& p) const;
};

Series extract_feature(const PoseSequence& p, const FeatureDef& def);

/// Euclidean displacement between successive frames (length n - 1).
Series magnitude_series(const PoseSequence& p, std::size_t keypoint);

/// Per-frame distance between two keypoints, or along one axis when given.
Series aperture(const PoseSequence& p, std::size_t a, std::size_t b, std::optional<std::size_t> axis = std::nullopt);

/// Mean of several apertures (e.g. both eyes); a frame is valid when at least
/// one pair is valid.
Series mean_aperture(const PoseSequence& p, const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                     std::optional<std::size_t> axis = std::nullopt);

/// Per-frame distance between the centroids of two keypoint sets.
Series set_distance(const PoseSequence& p, const std::vector<std::size_t>& set_a, const std::vector<std::size_t>& set_b,
                    std::optional<std::size_t> axis = std::nullopt);

/// Centroid of the valid keypoints in each frame (frames with none are masked),
/// differentiated per axis, reduced to the velocity norm.
Series roi_centroid_velocity(const PoseSequence& p, const std::vector<std::size_t>& keypoints);

/// Central differences inside, one-sided first-order differences at the
/// edges, scaled by the sampling rate. A derivative sample is masked when its
/// stencil touches a masked sample.
Series differentiate(const Series& s, int order);

struct SummaryStats {
  double mean = 0.0;
  double sd = 0.0;  // sample SD (n - 1)
  double max = 0.0;
  double rms = 0.0;
  std::size_t n_valid = 0;
  bool flagged = false;  // fewer than half the window valid
};

struct WindowSummary {
  std::size_t start = 0;
  SummaryStats stats;
};

SummaryStats summarize(const Series& s);
std::vector<WindowSummary> summarize_window(const Series& s, const WindowSpec& windows);

struct KinematicSummary {
  std::size_t start = 0;
  SummaryStats displacement, velocity, acceleration;
  bool flagged = false;
};

/// Windowed {mean, sd, max} (plus rms) of a signal and its first two
/// derivatives.
std::vector<KinematicSummary> kinematic_summary(const Series& displacement, const WindowSpec& windows);

struct CrossCorrelation {
  std::vector<long> lags;
  std::vector<double> values;
  double lag0 = 0.0;

  long argmax() const;
};

/// Normalized cross-correlation r(l) = (1/n) sum_t za[t] zb[t + l] of the
/// z-scored inputs over lags -max_lag..max_lag. Pairs touching a masked sample
/// are skipped.
CrossCorrelation crosscorr(const Series& a, const Series& b, std::size_t max_lag);

FeatureKind parse_feature_kind(const std::string& text);

}  // namespace posedyn
