#include "posedyn/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "posedyn/error.hpp"

namespace posedyn {

PoseSequence mask_low_confidence(const PoseSequence& p, double threshold) {
  PoseSequence out = p;
  for (std::size_t f = 0; f < p.frames(); ++f)
    for (std::size_t k = 0; k < p.keypoints(); ++k)
      if (p.confidence(f, k) < threshold) out.set_valid(f, k, false);
  return out;
}

GapFillResult interpolate_gaps(const Series& s, const GapPolicy& policy) {
  if (s.count_valid() < 2) throw InputError("gap interpolation needs at least 2 valid samples");
  GapFillResult result{s, {}};
  Series& out = result.series;
  const std::size_t n = s.size();
  std::size_t i = 0;
  while (i < n) {
    if (s.valid(i)) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < n && !s.valid(i)) ++i;
    const std::size_t length = i - start;
    GapRecord rec{start, length, false, start == 0 || i == n};
    if (!rec.edge && length <= policy.max_gap) {
      const double left = s[start - 1];
      const double right = s[i];
      const double span = static_cast<double>(length + 1);
      for (std::size_t k = 0; k < length; ++k) {
        const double frac = static_cast<double>(k + 1) / span;
        out.set(start + k, left + (right - left) * frac);
      }
      rec.filled = true;
    }
    result.gaps.push_back(rec);
  }
  return result;
}

std::vector<Biquad> design_butterworth_lowpass(const FilterSpec& spec, double rate) {
  if (spec.order <= 0 || spec.order % 2 != 0) throw InputError("filter order must be a positive even integer");
  if (!(spec.cutoff > 0.0) || !(spec.cutoff < rate / 2.0))
    throw InputError("filter cutoff must lie strictly between 0 and the Nyquist frequency");
  const double k = std::tan(std::numbers::pi * spec.cutoff / rate);
  const double k2 = k * k;
  std::vector<Biquad> sections;
  for (int s = 0; s < spec.order / 2; ++s) {
    // Conjugate pole pair of the analog prototype: s^2 + a s + 1.
    const double a = 2.0 * std::sin(std::numbers::pi * (2.0 * s + 1.0) / (2.0 * spec.order));
    const double norm = 1.0 / (1.0 + a * k + k2);
    Biquad q{};
    q.b0 = k2 * norm;
    q.b1 = 2.0 * q.b0;
    q.b2 = q.b0;
    q.a1 = 2.0 * (k2 - 1.0) * norm;
    q.a2 = (1.0 - a * k + k2) * norm;
    sections.push_back(q);
  }
  return sections;
}

double magnitude_response_squared(const std::vector<Biquad>& sections, double hz, double rate) {
  const std::complex<double> z = std::polar(1.0, 2.0 * std::numbers::pi * hz / rate);
  const std::complex<double> zi = 1.0 / z;
  std::complex<double> h{1.0, 0.0};
  for (const auto& q : sections) h *= (q.b0 + q.b1 * zi + q.b2 * zi * zi) / (1.0 + q.a1 * zi + q.a2 * zi * zi);
  return std::norm(h);
}

namespace {

// Transposed direct form II, started in the steady state of a constant input
// equal to the first sample.
void filter_inplace(const std::vector<Biquad>& sections, std::vector<double>& x) {
  for (const auto& q : sections) {
    const double c = x.front();
    double z1 = (1.0 - q.b0) * c;
    double z2 = (q.b2 - q.a2) * c;
    for (double& v : x) {
      const double in = v;
      const double y = q.b0 * in + z1;
      z1 = q.b1 * in - q.a1 * y + z2;
      z2 = q.b2 * in - q.a2 * y;
      v = y;
    }
  }
}

std::size_t padding_length(const std::vector<Biquad>& sections, int order, std::size_t n) {
  double radius = 0.0;
  for (const auto& q : sections) {
    // Complex pair: a2 = r^2. Real pair: larger root of z^2 + a1 z + a2.
    const double disc = q.a1 * q.a1 - 4.0 * q.a2;
    const double r = disc < 0.0 ? std::sqrt(q.a2) : (std::abs(q.a1) + std::sqrt(disc)) / 2.0;
    radius = std::max(radius, r);
  }
  std::size_t pad = static_cast<std::size_t>(3 * order);
  if (radius > 0.0 && radius < 1.0) {
    const auto decay = static_cast<std::size_t>(std::ceil(-40.0 / std::log(radius)));
    pad = std::max(pad, decay);
  }
  return std::min(pad, n - 1);
}

}  // namespace

Series lowpass_zero_phase(const Series& s, const FilterSpec& spec) {
  if (!s.all_valid()) throw InputError("zero-phase filtering requires a gap-free series");
  if (s.size() < 2) throw InputError("zero-phase filtering needs at least 2 samples");
  const auto sections = design_butterworth_lowpass(spec, s.rate());
  const std::size_t n = s.size();
  const std::size_t pad = padding_length(sections, spec.order, n);

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  const double first = s[0];
  const double last = s[n - 1];
  for (std::size_t k = pad; k >= 1; --k) ext.push_back(2.0 * first - s[k]);
  for (std::size_t k = 0; k < n; ++k) ext.push_back(s[k]);
  for (std::size_t k = 1; k <= pad; ++k) ext.push_back(2.0 * last - s[n - 1 - k]);

  filter_inplace(sections, ext);
  std::reverse(ext.begin(), ext.end());
  filter_inplace(sections, ext);
  std::reverse(ext.begin(), ext.end());

  return Series(std::vector<double>(ext.begin() + static_cast<std::ptrdiff_t>(pad),
                                    ext.begin() + static_cast<std::ptrdiff_t>(pad + n)),
                s.rate());
}

Series lowpass_with_gaps(const Series& s, const FilterSpec& spec) {
  if (s.all_valid()) return lowpass_zero_phase(s, spec);
  const std::size_t n = s.size();
  // Bridge interior gaps and hold edge gaps at the nearest valid value.
  Series filled = interpolate_gaps(s, GapPolicy{n}).series;
  std::size_t first = 0;
  while (!filled.valid(first)) ++first;
  std::size_t last = n - 1;
  while (!filled.valid(last)) --last;
  for (std::size_t i = 0; i < first; ++i) filled.set(i, filled[first]);
  for (std::size_t i = last + 1; i < n; ++i) filled.set(i, filled[last]);

  Series out = lowpass_zero_phase(filled, spec);
  for (std::size_t i = 0; i < n; ++i)
    if (!s.valid(i)) out.invalidate(i);
  return out;
}

namespace {

// Second derivatives of the natural cubic spline through y on a unit grid.
std::vector<double> natural_spline_moments(std::span<const double> y) {
  const std::size_t n = y.size();
  std::vector<double> m(n, 0.0);
  if (n < 3) return m;
  const std::size_t k = n - 2;
  std::vector<double> diag(k, 4.0), rhs(k);
  for (std::size_t i = 0; i < k; ++i) rhs[i] = 6.0 * (y[i + 2] - 2.0 * y[i + 1] + y[i]);
  for (std::size_t i = 1; i < k; ++i) {
    const double w = 1.0 / diag[i - 1];
    diag[i] -= w;
    rhs[i] -= w * rhs[i - 1];
  }
  m[k] = rhs[k - 1] / diag[k - 1];
  for (std::size_t i = k - 1; i >= 1; --i) m[i] = (rhs[i - 1] - m[i + 1]) / diag[i - 1];
  return m;
}

}  // namespace

Series resample(const Series& s, double new_rate, ResampleMethod method) {
  if (!(new_rate > 0.0)) throw InputError("resample rate must be positive");
  if (s.empty()) throw InputError("cannot resample an empty series");
  if (new_rate == s.rate()) return s;
  const std::size_t n = s.size();

  if (method == ResampleMethod::kDecimate) {
    const double ratio = s.rate() / new_rate;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9)
      throw InputError("decimation needs an integer ratio between the old and new rates");
    const auto step = static_cast<std::size_t>(rounded);
    std::vector<double> v;
    std::vector<std::uint8_t> m;
    for (std::size_t i = 0; i < n; i += step) {
      v.push_back(s[i]);
      m.push_back(s.valid(i) ? 1 : 0);
    }
    return Series(std::move(v), std::move(m), new_rate);
  }

  const double scale = s.rate() / new_rate;  // source samples per output sample
  const auto n_out = static_cast<std::size_t>(std::floor(static_cast<double>(n - 1) / scale + 1e-9)) + 1;
  std::vector<double> out(n_out, 0.0);
  std::vector<std::uint8_t> mask(n_out, 0);

  // Contiguous valid runs, each with its own spline.
  std::vector<std::size_t> run_of(n, SIZE_MAX);
  std::vector<std::pair<std::size_t, std::vector<double>>> runs;  // start, moments
  for (std::size_t i = 0; i < n;) {
    if (!s.valid(i)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && s.valid(j)) run_of[j++] = runs.size();
    runs.emplace_back(i, natural_spline_moments(s.values().subspan(i, j - i)));
    i = j;
  }

  for (std::size_t k = 0; k < n_out; ++k) {
    const double u = static_cast<double>(k) * scale;
    auto i = static_cast<std::size_t>(std::floor(u + 1e-9));
    if (i >= n) i = n - 1;
    const double frac = u - static_cast<double>(i);
    if (std::abs(frac) <= 1e-9) {
      if (s.valid(i)) {
        out[k] = s[i];
        mask[k] = 1;
      }
      continue;
    }
    if (i + 1 >= n || run_of[i] == SIZE_MAX || run_of[i] != run_of[i + 1]) continue;
    const auto& [start, moments] = runs[run_of[i]];
    const double mi = moments[i - start];
    const double mj = moments[i + 1 - start];
    const double a = 1.0 - frac;
    const double b = frac;
    out[k] = mi * a * a * a / 6.0 + mj * b * b * b / 6.0 + (s[i] - mi / 6.0) * a + (s[i + 1] - mj / 6.0) * b;
    mask[k] = 1;
  }
  return Series(std::move(out), std::move(mask), new_rate);
}

namespace {

struct Moments {
  double mean = 0.0;
  double sd = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
  std::size_t n = 0;
};

Moments valid_moments(const Series& s) {
  Moments mo;
  double sum = 0.0;
  mo.min = INFINITY;
  mo.max = -INFINITY;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s.valid(i)) continue;
    sum += s[i];
    mo.min = std::min(mo.min, s[i]);
    mo.max = std::max(mo.max, s[i]);
    ++mo.n;
  }
  if (mo.n == 0) return mo;
  mo.mean = sum / static_cast<double>(mo.n);
  double ss = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.valid(i)) ss += (s[i] - mo.mean) * (s[i] - mo.mean);
  mo.sd = std::sqrt(ss / static_cast<double>(mo.n));
  return mo;
}

}  // namespace

Series normalize(const Series& s, NormalizeMode mode) {
  if (mode == NormalizeMode::kNone) return s;
  const Moments mo = valid_moments(s);
  if (mo.n == 0) throw InputError("cannot normalize a series with no valid samples");
  Series out = s;
  auto& v = out.mutable_values();
  if (mode == NormalizeMode::kZScore) {
    if (!(mo.sd > 0.0)) throw DegenerateInputError("z-score of a constant series (zero standard deviation)");
    for (std::size_t i = 0; i < v.size(); ++i)
      if (s.valid(i)) v[i] = (s[i] - mo.mean) / mo.sd;
  } else {
    const double range = mo.max - mo.min;
    if (!(range > 0.0)) throw DegenerateInputError("unit-interval scaling of a constant series (zero range)");
    for (std::size_t i = 0; i < v.size(); ++i)
      if (s.valid(i)) v[i] = (s[i] - mo.min) / range;
  }
  return out;
}

std::vector<Series> normalize_windows(const Series& s, NormalizeMode mode, const WindowSpec& windows) {
  std::vector<Series> out;
  for (const auto& w : make_windows(s.size(), windows)) out.push_back(normalize(s.slice(w.begin, w.end), mode));
  return out;
}

Series detrend(const Series& s) {
  if (s.count_valid() < 2) throw InputError("detrending needs at least 2 valid samples");
  double n = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s.valid(i)) continue;
    n += 1.0;
    sx += static_cast<double>(i);
    sy += s[i];
  }
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s.valid(i)) continue;
    const double dx = static_cast<double>(i) - mx;
    sxx += dx * dx;
    sxy += dx * (s[i] - my);
  }
  const double slope = sxy / sxx;
  Series out = s;
  auto& v = out.mutable_values();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (s.valid(i)) v[i] = s[i] - (my + slope * (static_cast<double>(i) - mx));
  return out;
}

NormalizeMode parse_normalize_mode(const std::string& text) {
  if (text == "zscore") return NormalizeMode::kZScore;
  if (text == "unit" || text == "unit_interval") return NormalizeMode::kUnitInterval;
  if (text == "none") return NormalizeMode::kNone;
  throw InputError("unknown normalization '" + text + "' (expected zscore, unit_interval or none)");
}

ResampleMethod parse_resample_method(const std::string& text) {
  if (text == "cubic") return ResampleMethod::kCubic;
  if (text == "decimate") return ResampleMethod::kDecimate;
  throw InputError("unknown resample method '" + text + "' (expected cubic or decimate)");
}

}  // namespace posedyn
