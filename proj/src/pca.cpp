#include "posedyn/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "posedyn/error.hpp"

namespace posedyn {

PcaModel fit_pca(const Eigen::MatrixXd& frames, bool standardize, std::size_t dims, std::size_t n_components) {
  const auto t = frames.rows();
  const auto p = frames.cols();
  if (t < 2) throw InputError("PCA needs at least two frames");
  if (dims == 0 || p % static_cast<Eigen::Index>(dims) != 0) throw InputError("PCA column count is not a multiple of dims");

  PcaModel model;
  model.dims = dims;
  model.standardized = standardize;
  model.mean = frames.colwise().mean();
  Eigen::MatrixXd centered = frames.rowwise() - model.mean;
  model.scale = Eigen::RowVectorXd::Ones(p);
  if (standardize) {
    for (Eigen::Index c = 0; c < p; ++c) {
      const double sd = std::sqrt(centered.col(c).squaredNorm() / static_cast<double>(t - 1));
      if (!(sd > 0.0)) throw DegenerateInputError("PCA column " + std::to_string(c) + " has zero variance");
      model.scale(c) = sd;
    }
    centered = centered.array().rowwise() / model.scale.array();
  }
  if (t <= p)
    model.warnings.push_back("fewer frames (" + std::to_string(t) + ") than coordinates (" + std::to_string(p) + ")");

  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(t - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw Error("covariance eigen-decomposition failed");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return eig.eigenvalues()(a) > eig.eigenvalues()(b); });

  const auto keep = n_components == 0 ? p : std::min<Eigen::Index>(p, static_cast<Eigen::Index>(n_components));
  model.total_variance = cov.trace();
  model.loadings.resize(p, keep);
  model.explained_variance.resize(keep);
  for (Eigen::Index c = 0; c < keep; ++c) {
    Eigen::VectorXd v = eig.eigenvectors().col(order[static_cast<std::size_t>(c)]);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    model.loadings.col(c) = v;
    model.explained_variance(c) = std::max(0.0, eig.eigenvalues()(order[static_cast<std::size_t>(c)]));
  }
  model.explained_ratio = model.total_variance > 0.0 ? Eigen::VectorXd(model.explained_variance / model.total_variance)
                                                     : Eigen::VectorXd(Eigen::VectorXd::Zero(keep));
  return model;
}

Eigen::MatrixXd project(const PcaModel& model, const Eigen::MatrixXd& frames) {
  if (frames.cols() != model.mean.size()) throw InputError("frame dimension does not match the PCA model");
  Eigen::MatrixXd centered = frames.rowwise() - model.mean;
  centered = centered.array().rowwise() / model.scale.array();
  return centered * model.loadings;
}

Eigen::MatrixXd reconstruct(const PcaModel& model, const Eigen::MatrixXd& scores) {
  if (scores.cols() != model.loadings.cols()) throw InputError("score dimension does not match the PCA model");
  Eigen::MatrixXd out = scores * model.loadings.transpose();
  out = out.array().rowwise() * model.scale.array();
  return out.rowwise() + model.mean;
}

std::vector<PrincipalMovement> principal_movements(const PcaModel& model, std::size_t k, double target_rms) {
  if (k > model.components()) throw InputError("requested more principal movements than components");
  if (!(target_rms > 0.0)) throw InputError("target RMS displacement must be positive");
  const auto dims = static_cast<Eigen::Index>(model.dims);
  const auto keypoints = model.mean.size() / dims;
  auto reshape = [&](const Eigen::RowVectorXd& flat) {
    Eigen::MatrixXd pose(keypoints, dims);
    for (Eigen::Index r = 0; r < keypoints; ++r) pose.row(r) = flat.segment(r * dims, dims);
    return pose;
  };

  std::vector<PrincipalMovement> out;
  for (std::size_t c = 0; c < k; ++c) {
    // Loading in original units; per-keypoint displacement between the
    // postures is 2 * a * |direction_k|.
    const Eigen::RowVectorXd direction =
        model.loadings.col(static_cast<Eigen::Index>(c)).transpose().cwiseProduct(model.scale);
    const double per_keypoint_rms = std::sqrt(direction.squaredNorm() / static_cast<double>(keypoints));
    PrincipalMovement pm;
    pm.component = c;
    pm.amplification = target_rms / (2.0 * per_keypoint_rms);
    pm.min_pose = reshape(model.mean - pm.amplification * direction);
    pm.max_pose = reshape(model.mean + pm.amplification * direction);
    out.push_back(std::move(pm));
  }
  return out;
}

Eigen::MatrixXd pose_matrix(const std::vector<PoseSequence>& data) {
  if (data.empty()) throw InputError("no pose sequences given");
  const std::size_t k = data.front().keypoints();
  const std::size_t d = data.front().dims();
  std::vector<std::pair<const PoseSequence*, std::size_t>> rows;
  for (const auto& p : data) {
    if (p.keypoints() != k || p.dims() != d) throw InputError("pose sequences differ in keypoints or dims");
    for (std::size_t f = 0; f < p.frames(); ++f) {
      bool ok = true;
      for (std::size_t j = 0; j < k && ok; ++j) ok = p.valid(f, j);
      if (ok) rows.emplace_back(&p, f);
    }
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(k * d));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t c = 0; c < d; ++c)
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j * d + c)) = rows[r].first->coord(rows[r].second, j, c);
  return out;
}

double translation_leakage(const PcaModel& model, const Eigen::MatrixXd& frames) {
  if (model.components() == 0 || frames.rows() < 2) return 0.0;
  const Eigen::VectorXd score = project(model, frames).col(0);
  const auto dims = static_cast<Eigen::Index>(model.dims);
  const auto keypoints = frames.cols() / dims;
  auto corr = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::VectorXd ca = a.array() - a.mean();
    const Eigen::VectorXd cb = b.array() - b.mean();
    const double denom = ca.norm() * cb.norm();
    return denom > 0.0 ? ca.dot(cb) / denom : 0.0;
  };
  double worst = 0.0;
  for (Eigen::Index d = 0; d < dims; ++d) {
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(frames.rows());
    for (Eigen::Index k = 0; k < keypoints; ++k) centroid += frames.col(k * dims + d);
    centroid /= static_cast<double>(keypoints);
    worst = std::max(worst, std::abs(corr(score, centroid)));
  }
  return worst;
}

}  // namespace posedyn
