#include "posedyn/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "posedyn/error.hpp"

namespace posedyn {

namespace {

void check_keypoint(const PoseSequence& p, std::size_t k) {
  if (k >= p.keypoints()) throw InputError("keypoint index " + std::to_string(k) + " out of range");
}

void check_axis(const PoseSequence& p, std::optional<std::size_t> axis) {
  if (axis && *axis >= p.dims()) throw InputError("axis " + std::to_string(*axis) + " out of range");
}

double point_distance(const PoseSequence& p, std::size_t f1, std::size_t k1, std::size_t f2, std::size_t k2,
                      std::optional<std::size_t> axis) {
  if (axis) return std::abs(p.coord(f1, k1, *axis) - p.coord(f2, k2, *axis));
  double ss = 0.0;
  for (std::size_t d = 0; d < p.dims(); ++d) {
    const double diff = p.coord(f1, k1, d) - p.coord(f2, k2, d);
    ss += diff * diff;
  }
  return std::sqrt(ss);
}

// Centroid of the valid members of `set` in frame f; false when none valid.
bool centroid(const PoseSequence& p, std::size_t f, const std::vector<std::size_t>& set, std::vector<double>& out) {
  out.assign(p.dims(), 0.0);
  double n = 0.0;
  for (auto k : set) {
    if (!p.valid(f, k)) continue;
    for (std::size_t d = 0; d < p.dims(); ++d) out[d] += p.coord(f, k, d);
    n += 1.0;
  }
  if (n == 0.0) return false;
  for (auto& v : out) v /= n;
  return true;
}

}  // namespace

void FeatureDef::validate(const PoseSequence& p) const {
  check_axis(p, axis);
  for (auto k : keypoints) check_keypoint(p, k);
  for (auto [a, b] : pairs) {
    check_keypoint(p, a);
    check_keypoint(p, b);
  }
  for (auto k : set_a) check_keypoint(p, k);
  for (auto k : set_b) check_keypoint(p, k);
  switch (kind) {
    case FeatureKind::kRawCoord:
      if (keypoints.size() != 1 || !axis) throw InputError("feature '" + name + "': raw_coord needs one keypoint and an axis");
      break;
    case FeatureKind::kMagnitude:
      if (keypoints.size() != 1) throw InputError("feature '" + name + "': magnitude needs exactly one keypoint");
      break;
    case FeatureKind::kAperture:
      if (pairs.empty()) throw InputError("feature '" + name + "': aperture needs at least one keypoint pair");
      break;
    case FeatureKind::kDistance:
      if (set_a.empty() || set_b.empty()) throw InputError("feature '" + name + "': distance needs two keypoint sets");
      break;
    case FeatureKind::kCentroidMagnitude:
      if (keypoints.empty()) throw InputError("feature '" + name + "': centroid_magnitude needs keypoints");
      break;
  }
}

Series extract_feature(const PoseSequence& p, const FeatureDef& def) {
  def.validate(p);
  switch (def.kind) {
    case FeatureKind::kRawCoord:
      return p.axis_series(def.keypoints.front(), *def.axis);
    case FeatureKind::kMagnitude:
      return magnitude_series(p, def.keypoints.front());
    case FeatureKind::kAperture:
      return mean_aperture(p, def.pairs, def.axis);
    case FeatureKind::kDistance:
      return set_distance(p, def.set_a, def.set_b, def.axis);
    case FeatureKind::kCentroidMagnitude:
      return roi_centroid_velocity(p, def.keypoints);
  }
  throw InputError("unknown feature kind");
}

Series magnitude_series(const PoseSequence& p, std::size_t keypoint) {
  check_keypoint(p, keypoint);
  const std::size_t n = p.frames() < 1 ? 0 : p.frames() - 1;
  std::vector<double> v(n, 0.0);
  std::vector<std::uint8_t> m(n, 0);
  for (std::size_t f = 0; f < n; ++f) {
    if (!p.valid(f, keypoint) || !p.valid(f + 1, keypoint)) continue;
    v[f] = point_distance(p, f + 1, keypoint, f, keypoint, std::nullopt);
    m[f] = 1;
  }
  return Series(std::move(v), std::move(m), p.rate());
}

Series aperture(const PoseSequence& p, std::size_t a, std::size_t b, std::optional<std::size_t> axis) {
  return mean_aperture(p, {{a, b}}, axis);
}

Series mean_aperture(const PoseSequence& p, const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                     std::optional<std::size_t> axis) {
  check_axis(p, axis);
  for (auto [a, b] : pairs) {
    check_keypoint(p, a);
    check_keypoint(p, b);
  }
  std::vector<double> v(p.frames(), 0.0);
  std::vector<std::uint8_t> m(p.frames(), 0);
  for (std::size_t f = 0; f < p.frames(); ++f) {
    double sum = 0.0, n = 0.0;
    for (auto [a, b] : pairs) {
      if (!p.valid(f, a) || !p.valid(f, b)) continue;
      sum += point_distance(p, f, a, f, b, axis);
      n += 1.0;
    }
    if (n > 0.0) {
      v[f] = sum / n;
      m[f] = 1;
    }
  }
  return Series(std::move(v), std::move(m), p.rate());
}

Series set_distance(const PoseSequence& p, const std::vector<std::size_t>& set_a, const std::vector<std::size_t>& set_b,
                    std::optional<std::size_t> axis) {
  check_axis(p, axis);
  for (auto k : set_a) check_keypoint(p, k);
  for (auto k : set_b) check_keypoint(p, k);
  std::vector<double> v(p.frames(), 0.0);
  std::vector<std::uint8_t> m(p.frames(), 0);
  std::vector<double> ca, cb;
  for (std::size_t f = 0; f < p.frames(); ++f) {
    if (!centroid(p, f, set_a, ca) || !centroid(p, f, set_b, cb)) continue;
    if (axis) {
      v[f] = std::abs(ca[*axis] - cb[*axis]);
    } else {
      double ss = 0.0;
      for (std::size_t d = 0; d < p.dims(); ++d) ss += (ca[d] - cb[d]) * (ca[d] - cb[d]);
      v[f] = std::sqrt(ss);
    }
    m[f] = 1;
  }
  return Series(std::move(v), std::move(m), p.rate());
}

Series roi_centroid_velocity(const PoseSequence& p, const std::vector<std::size_t>& keypoints) {
  if (keypoints.empty()) throw InputError("ROI needs at least one keypoint");
  for (auto k : keypoints) check_keypoint(p, k);
  const std::size_t n = p.frames();
  std::vector<Series> axes;
  std::vector<double> c;
  for (std::size_t d = 0; d < p.dims(); ++d)
    axes.emplace_back(std::vector<double>(n, 0.0), std::vector<std::uint8_t>(n, 0), p.rate());
  for (std::size_t f = 0; f < n; ++f) {
    if (!centroid(p, f, keypoints, c)) continue;
    for (std::size_t d = 0; d < p.dims(); ++d) axes[d].set(f, c[d]);
  }
  std::vector<double> v(n, 0.0);
  std::vector<std::uint8_t> m(n, 1);
  for (const auto& axis : axes) {
    const Series vel = differentiate(axis, 1);
    for (std::size_t f = 0; f < n; ++f) {
      if (!vel.valid(f)) m[f] = 0;
      v[f] += vel[f] * vel[f];
    }
  }
  for (std::size_t f = 0; f < n; ++f) v[f] = m[f] ? std::sqrt(v[f]) : 0.0;
  return Series(std::move(v), std::move(m), p.rate());
}

Series differentiate(const Series& s, int order) {
  if (order != 1 && order != 2) throw InputError("derivative order must be 1 or 2");
  const std::size_t n = s.size();
  std::vector<double> v(n, 0.0);
  std::vector<std::uint8_t> m(n, 0);
  const double r = s.rate();
  auto ok = [&](std::size_t a, std::size_t b) {
    for (std::size_t i = a; i <= b; ++i)
      if (!s.valid(i)) return false;
    return true;
  };

  if (order == 1) {
    if (n < 2) return Series(std::move(v), std::move(m), r);
    for (std::size_t i = 1; i + 1 < n; ++i)
      if (ok(i - 1, i + 1)) {
        v[i] = (s[i + 1] - s[i - 1]) * (r / 2.0);
        m[i] = 1;
      }
    if (ok(0, 1)) {
      v[0] = (s[1] - s[0]) * r;
      m[0] = 1;
    }
    if (ok(n - 2, n - 1)) {
      v[n - 1] = (s[n - 1] - s[n - 2]) * r;
      m[n - 1] = 1;
    }
  } else {
    if (n < 3) return Series(std::move(v), std::move(m), r);
    const double r2 = r * r;
    for (std::size_t i = 1; i + 1 < n; ++i)
      if (ok(i - 1, i + 1)) {
        v[i] = (s[i + 1] - 2.0 * s[i] + s[i - 1]) * r2;
        m[i] = 1;
      }
    if (ok(0, 2)) {
      v[0] = (s[2] - 2.0 * s[1] + s[0]) * r2;
      m[0] = 1;
    }
    if (ok(n - 3, n - 1)) {
      v[n - 1] = (s[n - 1] - 2.0 * s[n - 2] + s[n - 3]) * r2;
      m[n - 1] = 1;
    }
  }
  return Series(std::move(v), std::move(m), r);
}

SummaryStats summarize(const Series& s) {
  SummaryStats st;
  double sum = 0.0, sq = 0.0;
  st.max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s.valid(i)) continue;
    sum += s[i];
    sq += s[i] * s[i];
    st.max = std::max(st.max, s[i]);
    ++st.n_valid;
  }
  st.flagged = 2 * st.n_valid < s.size();
  if (st.n_valid == 0) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    st.mean = st.sd = st.max = st.rms = nan;
    return st;
  }
  const double n = static_cast<double>(st.n_valid);
  st.mean = sum / n;
  st.rms = std::sqrt(sq / n);
  double ss = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.valid(i)) ss += (s[i] - st.mean) * (s[i] - st.mean);
  st.sd = st.n_valid > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return st;
}

std::vector<WindowSummary> summarize_window(const Series& s, const WindowSpec& windows) {
  std::vector<WindowSummary> out;
  for (const auto& w : make_windows(s.size(), windows)) out.push_back({w.begin, summarize(s.slice(w.begin, w.end))});
  return out;
}

std::vector<KinematicSummary> kinematic_summary(const Series& displacement, const WindowSpec& windows) {
  const Series velocity = differentiate(displacement, 1);
  const Series acceleration = differentiate(displacement, 2);
  std::vector<KinematicSummary> out;
  for (const auto& w : make_windows(displacement.size(), windows)) {
    KinematicSummary k;
    k.start = w.begin;
    k.displacement = summarize(displacement.slice(w.begin, w.end));
    k.velocity = summarize(velocity.slice(w.begin, w.end));
    k.acceleration = summarize(acceleration.slice(w.begin, w.end));
    k.flagged = k.displacement.flagged;
    out.push_back(k);
  }
  return out;
}

long CrossCorrelation::argmax() const {
  const auto it = std::max_element(values.begin(), values.end());
  return lags[static_cast<std::size_t>(it - values.begin())];
}

CrossCorrelation crosscorr(const Series& a, const Series& b, std::size_t max_lag) {
  if (a.size() != b.size()) throw InputError("cross-correlation inputs differ in length");
  const std::size_t n = a.size();
  if (max_lag >= n) throw InputError("cross-correlation lag range exceeds the series length");

  auto zscore = [](const Series& s, double& count) {
    double sum = 0.0;
    count = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s.valid(i)) {
        sum += s[i];
        count += 1.0;
      }
    if (count == 0.0) throw InputError("cross-correlation input has no valid samples");
    const double mean = sum / count;
    double ss = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s.valid(i)) ss += (s[i] - mean) * (s[i] - mean);
    const double sd = std::sqrt(ss / count);
    if (!(sd > 0.0)) throw DegenerateInputError("cross-correlation of a zero-variance series");
    std::vector<double> z(s.size(), 0.0);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s.valid(i)) z[i] = (s[i] - mean) / sd;
    return z;
  };
  double na = 0.0, nb = 0.0;
  const auto za = zscore(a, na);
  const auto zb = zscore(b, nb);
  const double norm = std::sqrt(na * nb);

  CrossCorrelation cc;
  const auto lag_max = static_cast<long>(max_lag);
  for (long lag = -lag_max; lag <= lag_max; ++lag) {
    double sum = 0.0;
    for (long t = 0; t < static_cast<long>(n); ++t) {
      const long u = t + lag;
      if (u < 0 || u >= static_cast<long>(n)) continue;
      const auto ti = static_cast<std::size_t>(t), ui = static_cast<std::size_t>(u);
      if (!a.valid(ti) || !b.valid(ui)) continue;
      sum += za[ti] * zb[ui];
    }
    cc.lags.push_back(lag);
    cc.values.push_back(sum / norm);
  }
  cc.lag0 = cc.values[max_lag];
  return cc;
}

FeatureKind parse_feature_kind(const std::string& text) {
  if (text == "raw_coord") return FeatureKind::kRawCoord;
  if (text == "magnitude") return FeatureKind::kMagnitude;
  if (text == "aperture") return FeatureKind::kAperture;
  if (text == "distance") return FeatureKind::kDistance;
  if (text == "centroid_magnitude") return FeatureKind::kCentroidMagnitude;
  throw InputError("unknown feature kind '" + text + "'");
}

}  // namespace posedyn
