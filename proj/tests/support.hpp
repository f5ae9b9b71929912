#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <Eigen/Dense>

#include "posedyn/core.hpp"

namespace testing_support {

inline posedyn::Series sine(std::size_t n, double rate, double period, double amp = 1.0, double phase = 0.0) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = amp * std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / (rate * period) + phase);
  return posedyn::Series(std::move(v), rate);
}

inline posedyn::Series noise(std::size_t n, std::mt19937_64& rng, double sd = 1.0, double rate = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return posedyn::Series(std::move(v), rate);
}

// AR(1) noise: smooth enough to have real line structure.
inline posedyn::Series ar1(std::size_t n, std::mt19937_64& rng, double phi = 0.9, double rate = 1.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  double x = 0.0;
  for (auto& y : v) y = x = phi * x + g(rng);
  return posedyn::Series(std::move(v), rate);
}

// frames x (keypoints*3) poses from `modes` orthonormal directions with
// variances 1, 1/2, ..., plus isotropic noise carrying `noise_share` of the
// planted variance.
inline Eigen::MatrixXd planted_poses(std::size_t frames, std::size_t keypoints, std::size_t modes, double noise_share,
                                     std::mt19937_64& rng) {
  const auto p = static_cast<Eigen::Index>(keypoints * 3);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd raw(p, static_cast<Eigen::Index>(modes));
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = g(rng);
  const Eigen::MatrixXd basis = Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ() *
                                Eigen::MatrixXd::Identity(p, static_cast<Eigen::Index>(modes));
  double planted = 0.0;
  for (std::size_t k = 0; k < modes; ++k) planted += 1.0 / static_cast<double>(k + 1);
  const double noise_sd = std::sqrt(noise_share * planted / static_cast<double>(p));
  Eigen::MatrixXd out(static_cast<Eigen::Index>(frames), p);
  Eigen::RowVectorXd mean(p);
  for (Eigen::Index c = 0; c < p; ++c) mean(c) = 10.0 * g(rng);
  for (Eigen::Index f = 0; f < out.rows(); ++f) {
    Eigen::RowVectorXd row = mean;
    for (std::size_t k = 0; k < modes; ++k)
      row += g(rng) / std::sqrt(static_cast<double>(k + 1)) * basis.col(static_cast<Eigen::Index>(k)).transpose();
    for (Eigen::Index c = 0; c < p; ++c) row(c) += noise_sd * g(rng);
    out.row(f) = row;
  }
  return out;
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("posedyn_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// relative path -> file bytes, for every regular file below root
inline std::map<std::string, std::string> snapshot(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[std::filesystem::relative(e.path(), root).generic_string()] = ss.str();
  }
  return out;
}

// Runs a shell command and returns its exit status (-1 if it did not exit).
inline int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace testing_support
