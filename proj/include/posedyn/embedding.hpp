#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "posedyn/core.hpp"

namespace posedyn {

/// Row-major set of points in R^dim.
class PointCloud {
 public:
  PointCloud() = default;
  PointCloud(std::size_t count, std::size_t dim) : count_(count), dim_(dim), data_(count * dim, 0.0) {}

  std::size_t size() const { return count_; }
  std::size_t dim() const { return dim_; }
  std::span<const double> point(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  double& at(std::size_t i, std::size_t d) { return data_[i * dim_ + d]; }
  double at(std::size_t i, std::size_t d) const { return data_[i * dim_ + d]; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const PointCloud&) const = default;

 private:
  std::size_t count_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

struct EmbeddingSpec {
  std::size_t m = 1;        // dimension
  std::size_t tau = 1;      // delay in samples
  std::size_t theiler = 0;  // exclusion half-width in samples
  std::size_t l_min = 2;    // minimum line length

  /// Points produced from n samples: n - (m-1)*tau, or 0 when too short.
  std::size_t embedded_length(std::size_t n) const;
  void validate() const;
};

/// Delay vectors. Point i belongs to time t = i + (m-1)*tau and holds
/// (s[t], s[t-tau], ..., s[t-(m-1)*tau]). Throws InputError when the series
/// is too short or a masked sample falls inside the embedded span.
PointCloud delay_embed(const Series& s, std::size_t m, std::size_t tau);

struct AmiCurve {
  std::vector<double> mi;  // nats, index = lag (0..max_lag)
  std::optional<std::size_t> first_minimum;
  std::optional<std::size_t> plateau_onset;
  std::size_t local_minima = 0;  // descriptive only
};

/// Histogram mutual information between x(t) and x(t+lag) for lags
/// 0..max_lag using `bins` equal-width bins over the valid range.
///
/// first_minimum is the first strict local minimum. plateau_onset is the
/// first lag L for which the three steps L->L+1, L+1->L+2, L+2->L+3 each
/// change MI by less than 1% of the curve's range.
AmiCurve ami(const Series& s, std::size_t max_lag, std::size_t bins = 32);

struct FnnCurve {
  std::vector<double> fraction;  // index d-1 for dimension d = 1..max_m
  std::optional<std::size_t> selected_m;
};

struct FnnOptions {
  double r_tol = 10.0;
  double a_tol = 2.0;
  double threshold = 0.01;  // selected_m = first dim with fraction below this
};

/// Kennel false-nearest-neighbour fractions for dimensions 1..max_m.
FnnCurve fnn(const Series& s, std::size_t tau, std::size_t max_m, const FnnOptions& opt = {});

struct SeriesEmbeddingEstimate {
  AmiCurve ami;
  std::optional<std::size_t> tau;  // first minimum, else plateau onset
  FnnCurve fnn;
};

struct SampleEmbeddingEstimate {
  EmbeddingSpec spec;  // tau = median, m = max, theiler = tau, l_min = 2
  std::vector<SeriesEmbeddingEstimate> per_series;
};

struct EmbeddingSearch {
  std::size_t max_lag = 100;
  std::size_t max_m = 10;
  std::size_t bins = 32;
  FnnOptions fnn;
  std::size_t jobs = 1;
};

/// Runs AMI and FNN on every series and aggregates: tau is the median of the
/// per-series delays, m the maximum of the per-series dimensions.
SampleEmbeddingEstimate estimate_sample_parameters(const std::vector<Series>& series, const EmbeddingSearch& search);

}  // namespace posedyn
