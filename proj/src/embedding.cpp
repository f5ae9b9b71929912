#include "posedyn/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "posedyn/error.hpp"
#include "posedyn/parallel.hpp"

namespace posedyn {

std::size_t EmbeddingSpec::embedded_length(std::size_t n) const {
  const std::size_t span = (m - 1) * tau;
  return n > span ? n - span : 0;
}

void EmbeddingSpec::validate() const {
  if (m < 1) throw InputError("embedding dimension must be at least 1");
  if (tau < 1) throw InputError("embedding delay must be at least 1");
  if (l_min < 2) throw InputError("minimum line length must be at least 2");
}

PointCloud delay_embed(const Series& s, std::size_t m, std::size_t tau) {
  if (m < 1 || tau < 1) throw InputError("embedding needs m >= 1 and tau >= 1");
  const std::size_t span = (m - 1) * tau;
  if (s.size() <= span)
    throw InputError("series of " + std::to_string(s.size()) + " samples is too short to embed with m=" +
                     std::to_string(m) + ", tau=" + std::to_string(tau));
  for (std::size_t i = 0; i < s.size(); ++i)
    if (!s.valid(i)) throw InputError("masked sample " + std::to_string(i) + " inside the embedded span");
  const std::size_t count = s.size() - span;
  PointCloud out(count, m);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t t = i + span;
    for (std::size_t d = 0; d < m; ++d) out.at(i, d) = s[t - d * tau];
  }
  return out;
}

AmiCurve ami(const Series& s, std::size_t max_lag, std::size_t bins) {
  if (bins < 2) throw InputError("AMI needs at least 2 bins");
  if (max_lag >= s.size()) throw InputError("AMI lag range exceeds the series length");
  const std::size_t valid = s.count_valid();
  if (valid < 10 * bins)
    throw InputError("AMI needs at least " + std::to_string(10 * bins) + " valid samples for " + std::to_string(bins) +
                     " bins");

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.valid(i)) {
      lo = std::min(lo, s[i]);
      hi = std::max(hi, s[i]);
    }
  if (!(hi > lo)) throw DegenerateInputError("AMI of a constant series");

  std::vector<std::size_t> bin(s.size(), 0);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.valid(i)) bin[i] = std::min(bins - 1, static_cast<std::size_t>((s[i] - lo) / width));

  AmiCurve curve;
  curve.mi.resize(max_lag + 1, 0.0);
  std::vector<double> joint(bins * bins), pa(bins), pb(bins);
  for (std::size_t lag = 0; lag <= max_lag; ++lag) {
    std::fill(joint.begin(), joint.end(), 0.0);
    std::fill(pa.begin(), pa.end(), 0.0);
    std::fill(pb.begin(), pb.end(), 0.0);
    double pairs = 0.0;
    for (std::size_t t = 0; t + lag < s.size(); ++t) {
      if (!s.valid(t) || !s.valid(t + lag)) continue;
      joint[bin[t] * bins + bin[t + lag]] += 1.0;
      pa[bin[t]] += 1.0;
      pb[bin[t + lag]] += 1.0;
      pairs += 1.0;
    }
    if (pairs == 0.0) continue;
    double mi = 0.0;
    for (std::size_t a = 0; a < bins; ++a)
      for (std::size_t b = 0; b < bins; ++b) {
        const double c = joint[a * bins + b];
        if (c > 0.0) mi += (c / pairs) * std::log(c * pairs / (pa[a] * pb[b]));
      }
    curve.mi[lag] = std::max(mi, 0.0);
  }

  for (std::size_t lag = 1; lag + 1 <= max_lag; ++lag) {
    if (curve.mi[lag] < curve.mi[lag - 1] && curve.mi[lag] < curve.mi[lag + 1]) {
      if (!curve.first_minimum) curve.first_minimum = lag;
      ++curve.local_minima;
    }
  }

  const auto [mn, mx] = std::minmax_element(curve.mi.begin(), curve.mi.end());
  const double flat = 0.01 * (*mx - *mn);
  for (std::size_t lag = 0; lag + 3 <= max_lag; ++lag) {
    bool level = true;
    for (std::size_t k = 0; k < 3 && level; ++k)
      level = std::abs(curve.mi[lag + k + 1] - curve.mi[lag + k]) < flat;
    if (level) {
      curve.plateau_onset = lag;
      break;
    }
  }
  return curve;
}

FnnCurve fnn(const Series& s, std::size_t tau, std::size_t max_m, const FnnOptions& opt) {
  if (tau < 1 || max_m < 1) throw InputError("FNN needs tau >= 1 and max_m >= 1");
  if (!s.all_valid()) throw InputError("FNN requires a gap-free series");
  const std::size_t n = s.size();
  if (n < max_m * tau + 2)
    throw InputError("series too short for FNN up to m=" + std::to_string(max_m) + " with tau=" + std::to_string(tau));

  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += s[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) ss += (s[i] - mean) * (s[i] - mean);
  const double spread = std::sqrt(ss / static_cast<double>(n));
  if (!(spread > 0.0)) throw DegenerateInputError("FNN of a constant series");
  const double zero = 1e-10 * spread;

  FnnCurve curve;
  for (std::size_t d = 1; d <= max_m; ++d) {
    const std::size_t count = n - d * tau;  // x[i + d*tau] must exist
    std::size_t false_nn = 0;
    for (std::size_t i = 0; i < count; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t nn = i;
      for (std::size_t j = 0; j < count; ++j) {
        if (j == i) continue;
        double dist = 0.0;
        for (std::size_t c = 0; c < d && dist < best; ++c) {
          const double diff = s[i + c * tau] - s[j + c * tau];
          dist += diff * diff;
        }
        if (dist < best) {
          best = dist;
          nn = j;
        }
      }
      const double rd = std::sqrt(best);
      const double inc = std::abs(s[i + d * tau] - s[nn + d * tau]);
      bool is_false = false;
      if (rd > zero)
        is_false = inc / rd > opt.r_tol;
      else
        is_false = inc > zero;
      if (!is_false) is_false = std::sqrt(best + inc * inc) / spread > opt.a_tol;
      if (is_false) ++false_nn;
    }
    const double fraction = static_cast<double>(false_nn) / static_cast<double>(count);
    curve.fraction.push_back(fraction);
    if (!curve.selected_m && fraction < opt.threshold) curve.selected_m = d;
  }
  return curve;
}

SampleEmbeddingEstimate estimate_sample_parameters(const std::vector<Series>& series, const EmbeddingSearch& search) {
  if (series.empty()) throw InputError("parameter estimation needs at least one series");
  SampleEmbeddingEstimate out;
  out.per_series = parallel_map(series.size(), search.jobs, [&](std::size_t i) {
    SeriesEmbeddingEstimate est;
    est.ami = ami(series[i], search.max_lag, search.bins);
    est.tau = est.ami.first_minimum ? est.ami.first_minimum : est.ami.plateau_onset;
    if (est.tau && *est.tau > 0) est.fnn = fnn(series[i], *est.tau, search.max_m, search.fnn);
    return est;
  });

  std::vector<std::size_t> taus;
  std::size_t m = 1;
  for (const auto& est : out.per_series) {
    if (est.tau && *est.tau > 0) taus.push_back(*est.tau);
    if (!est.fnn.fraction.empty()) m = std::max(m, est.fnn.selected_m.value_or(search.max_m));
  }
  std::size_t tau = search.max_lag;
  if (!taus.empty()) {
    std::sort(taus.begin(), taus.end());
    const std::size_t mid = taus.size() / 2;
    tau = taus.size() % 2 == 1 ? taus[mid]
                               : static_cast<std::size_t>(std::llround((taus[mid - 1] + taus[mid]) / 2.0));
  }
  out.spec = EmbeddingSpec{m, tau, tau, 2};
  return out;
}

}  // namespace posedyn
