#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "posedyn/core.hpp"

namespace posedyn {

enum class TemplateSource { kGlobalMean, kReferenceFrame, kSynthetic };

struct Template {
  Eigen::MatrixXd points;  // keypoints x dims
  std::vector<std::size_t> keypoints;  // pose indices the rows refer to
  TemplateSource source = TemplateSource::kGlobalMean;
  Eigen::RowVectorXd centroid;
};

/// Per-keypoint mean over every frame in which that keypoint is valid, pooled
/// across all sequences. With center_frames, each frame is first translated so
/// the centroid of its valid selected keypoints sits at the origin.
Template build_template(const std::vector<PoseSequence>& data, const std::vector<std::size_t>& keypoints,
                        bool center_frames = false);

/// Mirrors the template across the plane axis = midline and averages each
/// keypoint with its mirrored partner. `pairs` index rows of the template;
/// keypoints not listed are their own partner.
Template symmetrize_template(const Template& t, const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                             std::size_t axis = 0);

/// Row-vector similarity transform x -> s * x * R + t.
struct ProcrustesTransform {
  double scale = 1.0;
  Eigen::MatrixXd rotation;      // dims x dims, orthogonal, det +1
  Eigen::RowVectorXd translation;

  static ProcrustesTransform identity(std::size_t dims);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& points) const;
  ProcrustesTransform inverse() const;
  /// (this then other): x -> other(this(x)).
  ProcrustesTransform then(const ProcrustesTransform& other) const;
  /// Frobenius distance of the homogeneous matrix from identity.
  double deviation_from_identity() const;
};

/// Least-squares fit of T ~ s X R + 1 t^T. Reflections are excluded. Throws
/// DegenerateInputError for coincident or collinear configurations.
ProcrustesTransform fit_procrustes(const Eigen::MatrixXd& x, const Eigen::MatrixXd& t, bool allow_scale);

/// Maps every valid coordinate of frames [range.begin, range.end); masks are
/// preserved.
PoseSequence apply_transform(const PoseSequence& p, const ProcrustesTransform& tf, IndexRange range);

/// Selected keypoints of one frame (valid rows only) with their template rows.
struct FrameSelection {
  Eigen::MatrixXd points;
  Eigen::MatrixXd target;
};
FrameSelection select_frame(const PoseSequence& p, std::size_t frame, const Template& t);

struct FrameAlignment {
  PoseSequence aligned;
  std::vector<std::optional<ProcrustesTransform>> transforms;  // absent: too few valid points
};

/// Fits each frame onto the template and transforms that frame. Frames that
/// cannot be fitted are masked.
FrameAlignment align_frames(const PoseSequence& p, const Template& t, bool allow_scale, std::size_t jobs = 1);

struct WindowAlignment {
  std::size_t start = 0;
  PoseSequence aligned;
  ProcrustesTransform transform;
};

/// Fits the mean pose of each window onto the template and applies that
/// transform to every frame of the window. With center_on, each window is
/// first translated so that keypoint's window mean sits at the origin.
std::vector<WindowAlignment> align_windows(const PoseSequence& p, const Template& t, const WindowSpec& windows,
                                           bool allow_scale, std::optional<std::size_t> center_on = std::nullopt,
                                           std::size_t jobs = 1);

struct TransformFeatures {
  Series tx, ty, tz;      // tz empty in 2D
  Series translation;     // |t|
  Series angle;           // 2D: signed angle; 3D: rotation-vector norm (radians)
  Series scale;
  Series motion;          // weighted sum of normalized per-frame changes
};

struct MotionWeights {
  double translation = 1.0;
  double rotation = 1.0;
  double scale = 1.0;
};

/// Head-motion features from per-frame transforms. The combined motion at
/// frame k sums |delta t|, |delta angle| and |delta s| between frames k-1 and
/// k, each divided by its SD over the recording (a zero SD contributes 0).
TransformFeatures transform_features(const std::vector<std::optional<ProcrustesTransform>>& transforms, double rate,
                                     const MotionWeights& weights = {});

/// Rotation angle: signed atan2 angle in 2D, rotation-vector norm in 3D.
double rotation_angle(const Eigen::MatrixXd& r);

}  // namespace posedyn
