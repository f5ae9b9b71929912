#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "posedyn/error.hpp"
#include "posedyn/pca.hpp"
#include "support.hpp"

using namespace posedyn;

namespace {

Eigen::MatrixXd random_frames(Eigen::Index t, Eigen::Index p, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd x(t, p);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  // correlate the columns a little
  Eigen::MatrixXd mix(p, p);
  for (Eigen::Index i = 0; i < mix.size(); ++i) mix.data()[i] = g(rng);
  return x * mix;
}

// naive sample covariance
Eigen::MatrixXd covariance(const Eigen::MatrixXd& x) {
  const auto t = x.rows(), p = x.cols();
  std::vector<double> mean(static_cast<std::size_t>(p), 0.0);
  for (Eigen::Index c = 0; c < p; ++c) {
    for (Eigen::Index r = 0; r < t; ++r) mean[static_cast<std::size_t>(c)] += x(r, c);
    mean[static_cast<std::size_t>(c)] /= static_cast<double>(t);
  }
  Eigen::MatrixXd cov(p, p);
  for (Eigen::Index a = 0; a < p; ++a)
    for (Eigen::Index b = 0; b < p; ++b) {
      double s = 0;
      for (Eigen::Index r = 0; r < t; ++r)
        s += (x(r, a) - mean[static_cast<std::size_t>(a)]) * (x(r, b) - mean[static_cast<std::size_t>(b)]);
      cov(a, b) = s / static_cast<double>(t - 1);
    }
  return cov;
}

}  // namespace

TEST(Pca, FullReconstructionAndOrthonormality) {
  std::mt19937_64 rng(31);
  for (bool standardize : {false, true}) {
    const auto x = random_frames(200, 24, rng);
    const auto model = fit_pca(x, standardize, 3);
    ASSERT_EQ(model.components(), 24u);
    const Eigen::MatrixXd back = reconstruct(model, project(model, x));
    EXPECT_LT((back - x).norm(), 1e-9);
    const Eigen::MatrixXd gram = model.loadings.transpose() * model.loadings;
    EXPECT_LT((gram - Eigen::MatrixXd::Identity(24, 24)).norm(), 1e-10);
    EXPECT_NEAR(model.explained_ratio.sum(), 1.0, 1e-10);
  }
}

TEST(Pca, DiagonalizesTheCovariance) {
  std::mt19937_64 rng(32);
  const auto x = random_frames(150, 12, rng);
  const auto model = fit_pca(x, false, 3);
  const Eigen::MatrixXd cov = covariance(x);
  EXPECT_NEAR(model.total_variance, cov.trace(), 1e-9);
  const Eigen::MatrixXd d = model.loadings.transpose() * cov * model.loadings;
  for (Eigen::Index i = 0; i < 12; ++i)
    for (Eigen::Index j = 0; j < 12; ++j)
      EXPECT_NEAR(d(i, j), i == j ? model.explained_variance(i) : 0.0, 1e-8 * cov.trace());
  for (Eigen::Index i = 1; i < 12; ++i) EXPECT_GE(model.explained_variance(i - 1), model.explained_variance(i));
}

TEST(Pca, ScoresAreUncorrelated) {
  std::mt19937_64 rng(33);
  const auto x = random_frames(300, 9, rng);
  const auto model = fit_pca(x, false, 3);
  const Eigen::MatrixXd sc = covariance(project(model, x));
  for (Eigen::Index i = 0; i < 9; ++i)
    for (Eigen::Index j = 0; j < 9; ++j)
      if (i != j) EXPECT_NEAR(sc(i, j), 0.0, 1e-8 * model.total_variance);
}

TEST(Pca, SignConventionAndTruncation) {
  std::mt19937_64 rng(34);
  const auto x = random_frames(100, 15, rng);
  const auto model = fit_pca(x, false, 3, 4);
  ASSERT_EQ(model.components(), 4u);
  for (Eigen::Index c = 0; c < 4; ++c) {
    Eigen::Index arg = 0;
    model.loadings.col(c).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(model.loadings(arg, c), 0.0);
  }
  // retained variance is the same as in the full model
  const auto full = fit_pca(x, false, 3);
  for (Eigen::Index c = 0; c < 4; ++c) EXPECT_NEAR(model.explained_variance(c), full.explained_variance(c), 1e-9);
}

TEST(Pca, StandardizedScaleIsSampleSd) {
  std::mt19937_64 rng(35);
  const auto x = random_frames(80, 6, rng);
  const auto model = fit_pca(x, true, 3);
  const Eigen::MatrixXd cov = covariance(x);
  for (Eigen::Index c = 0; c < 6; ++c) EXPECT_NEAR(model.scale(c), std::sqrt(cov(c, c)), 1e-12 * std::sqrt(cov(c, c)));
  EXPECT_NEAR(model.total_variance, 6.0, 1e-10);
}

TEST(Pca, PlantedModesAreRecovered) {
  std::mt19937_64 rng(36);
  const auto x = testing_support::planted_poses(3000, 38, 14, 0.04, rng);
  const auto model = fit_pca(x, false, 3);
  EXPECT_GE(model.explained_ratio.head(14).sum(), 0.95);
  EXPECT_LT(model.explained_ratio(14), 0.01);
}

TEST(Pca, PrincipalMovementsHitTargetRms) {
  std::mt19937_64 rng(37);
  for (bool standardize : {false, true}) {
    const auto model = fit_pca(testing_support::planted_poses(500, 10, 4, 0.04, rng), standardize, 3);
    const auto pms = principal_movements(model, 3, 0.5);
    ASSERT_EQ(pms.size(), 3u);
    for (const auto& pm : pms) {
      ASSERT_EQ(pm.min_pose.rows(), 10);
      ASSERT_EQ(pm.min_pose.cols(), 3);
      double ss = 0;
      for (Eigen::Index k = 0; k < 10; ++k) ss += (pm.max_pose.row(k) - pm.min_pose.row(k)).squaredNorm();
      EXPECT_NEAR(std::sqrt(ss / 10.0), 0.5, 1e-12);
    }
    EXPECT_THROW(principal_movements(model, 99, 0.5), InputError);
    EXPECT_THROW(principal_movements(model, 1, 0.0), InputError);
  }
}

TEST(Pca, PoseMatrixSkipsMaskedFrames) {
  PoseSequence a(4, 2, 3, 30.0), b(2, 2, 3, 30.0);
  for (std::size_t f = 0; f < 4; ++f)
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t d = 0; d < 3; ++d) a.coord(f, k, d) = static_cast<double>(100 * f + 10 * k + d);
  a.set_valid(2, 1, false);
  const auto m = pose_matrix({a, b});
  ASSERT_EQ(m.rows(), 5);
  ASSERT_EQ(m.cols(), 6);
  EXPECT_EQ(m(2, 4), 311.0);  // frame 3, keypoint 1, y
  EXPECT_THROW(pose_matrix({a, PoseSequence(2, 3, 3, 30.0)}), InputError);
  EXPECT_THROW(pose_matrix({}), InputError);
}

TEST(Pca, TranslationLeakage) {
  std::mt19937_64 rng(38);
  auto x = testing_support::planted_poses(400, 12, 3, 0.04, rng);
  // remove every frame's centroid so nothing global is left
  for (Eigen::Index f = 0; f < x.rows(); ++f)
    for (Eigen::Index d = 0; d < 3; ++d) {
      double c = 0;
      for (Eigen::Index k = 0; k < 12; ++k) c += x(f, k * 3 + d) / 12.0;
      for (Eigen::Index k = 0; k < 12; ++k) x(f, k * 3 + d) -= c;
    }
  EXPECT_LT(translation_leakage(fit_pca(x, false, 3), x), 0.95);
  std::normal_distribution<double> g(0.0, 30.0);
  for (Eigen::Index f = 0; f < x.rows(); ++f) {
    const double shift = g(rng);
    for (Eigen::Index k = 0; k < 12; ++k) x(f, k * 3) += shift;
  }
  EXPECT_GT(translation_leakage(fit_pca(x, false, 3), x), 0.95);
}

TEST(Pca, Errors) {
  EXPECT_THROW(fit_pca(Eigen::MatrixXd::Ones(1, 6), false, 3), InputError);
  EXPECT_THROW(fit_pca(Eigen::MatrixXd::Ones(5, 7), false, 3), InputError);
  EXPECT_THROW(fit_pca(Eigen::MatrixXd::Ones(5, 6), true, 3), DegenerateInputError);
  std::mt19937_64 rng(39);
  const auto model = fit_pca(random_frames(5, 9, rng), false, 3);
  EXPECT_FALSE(model.warnings.empty());
  EXPECT_THROW(project(model, Eigen::MatrixXd::Ones(2, 6)), InputError);
}
