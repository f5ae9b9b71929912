#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "posedyn/core.hpp"

namespace posedyn {

struct PcaModel {
  std::size_t dims = 3;              // coordinates per keypoint, for reshaping
  Eigen::RowVectorXd mean;           // flattened K*D mean pose
  Eigen::RowVectorXd scale;          // per-column SD when standardized, else ones
  Eigen::MatrixXd loadings;          // (K*D) x n_components, orthonormal columns
  Eigen::VectorXd explained_variance;
  Eigen::VectorXd explained_ratio;
  double total_variance = 0.0;
  bool standardized = false;
  std::vector<std::string> warnings;

  std::size_t components() const { return static_cast<std::size_t>(loadings.cols()); }
  std::size_t features() const { return static_cast<std::size_t>(loadings.rows()); }
};

/// Eigen-decomposition of the sample covariance of `frames` (rows are frames).
/// Components are sorted by descending variance; each loading is signed so
/// its largest-magnitude element is positive. n_components = 0 keeps all.
PcaModel fit_pca(const Eigen::MatrixXd& frames, bool standardize, std::size_t dims, std::size_t n_components = 0);

/// Scores = ((frames - mean) / scale) * V.
Eigen::MatrixXd project(const PcaModel& model, const Eigen::MatrixXd& frames);
/// Inverse of project for the retained components.
Eigen::MatrixXd reconstruct(const PcaModel& model, const Eigen::MatrixXd& scores);

struct PrincipalMovement {
  std::size_t component = 0;
  double amplification = 0.0;
  Eigen::MatrixXd min_pose;  // K x D
  Eigen::MatrixXd max_pose;
};

/// Postures mean -/+ a * loading for the first k components, with a chosen so
/// that the RMS keypoint displacement between the two postures equals
/// target_rms.
std::vector<PrincipalMovement> principal_movements(const PcaModel& model, std::size_t k, double target_rms);

/// Flattens the valid frames of pose sequences into a T x (K*D) matrix.
/// Frames with any masked keypoint are skipped.
Eigen::MatrixXd pose_matrix(const std::vector<PoseSequence>& data);

/// Largest |correlation| between the first component's scores and any axis of
/// the per-frame pose centroid. Values above 0.95 suggest leftover global
/// translation.
double translation_leakage(const PcaModel& model, const Eigen::MatrixXd& frames);

}  // namespace posedyn
