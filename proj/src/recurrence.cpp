#include "posedyn/recurrence.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "posedyn/error.hpp"
#include "posedyn/parallel.hpp"

namespace posedyn {

Threshold Threshold::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw InputError("radius must look like fixed:V or rr:P (got '" + text + "')");
  const std::string kind = text.substr(0, colon);
  double value = 0.0;
  try {
    value = std::stod(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw InputError("radius value is not a number: '" + text + "'");
  }
  if (kind == "fixed") return fixed(value);
  if (kind == "rr") return target_rate(value);
  throw InputError("unknown radius kind '" + kind + "' (expected fixed or rr)");
}

void RecurrenceConfig::validate() const {
  if (threshold.kind == ThresholdKind::kTargetRate && !(threshold.value > 0.0 && threshold.value < 1.0))
    throw InputError("target recurrence rate must lie in (0, 1)");
  if (threshold.kind == ThresholdKind::kFixed && !(threshold.value >= 0.0))
    throw InputError("fixed radius must be non-negative");
  if (l_min < 2) throw InputError("minimum line length must be at least 2");
}

RecurrenceMatrix::RecurrenceMatrix(std::size_t rows, std::size_t cols, RecurrenceMode mode, std::size_t theiler)
    : rows_(rows),
      cols_(cols),
      words_((cols + 63) / 64),
      mode_(mode),
      theiler_(mode == RecurrenceMode::kCross ? 0 : theiler),
      bits_(rows * ((cols + 63) / 64), 0) {}

bool RecurrenceMatrix::eligible(std::size_t i, std::size_t j) const {
  if (!self_recurrence()) return true;
  const std::size_t gap = i > j ? i - j : j - i;
  return gap > theiler_;
}

std::size_t RecurrenceMatrix::eligible_cells() const {
  if (!self_recurrence()) return rows_ * cols_;
  const std::size_t n = rows_;
  std::size_t excluded = n;
  for (std::size_t k = 1; k <= theiler_ && k < n; ++k) excluded += 2 * (n - k);
  return n * n - std::min(excluded, n * n);
}

std::size_t RecurrenceMatrix::recurrent_points() const {
  std::size_t total = 0;
  for (auto w : bits_) total += static_cast<std::size_t>(std::popcount(w));
  return total;
}

void RecurrenceMatrix::refresh_rate() {
  const std::size_t e = eligible_cells();
  rr = e == 0 ? 0.0 : 100.0 * static_cast<double>(recurrent_points()) / static_cast<double>(e);
}

namespace {

double distance(std::span<const double> a, std::span<const double> b) {
  double ss = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    ss += diff * diff;
  }
  return std::sqrt(ss);
}

// Distances of the eligible cells, rescaled, thresholded into `r`. `pairs`
// enumerates cells in the same order as `dist`.
template <typename ForEachPair>
void threshold_into(RecurrenceMatrix& r, std::vector<double>& dist, const RecurrenceConfig& cfg, bool symmetric,
                    ForEachPair&& for_each_pair) {
  if (dist.empty()) throw InputError("recurrence matrix has no eligible cells (Theiler window too wide?)");
  double sum = 0.0, max = 0.0;
  for (double d : dist) {
    sum += d;
    max = std::max(max, d);
  }
  r.d_bar = sum / static_cast<double>(dist.size());
  if (!(r.d_bar > 0.0)) throw DegenerateInputError("all embedded points coincide (mean distance is zero)");
  switch (cfg.rescale) {
    case Rescale::kMean: r.distance_scale = r.d_bar; break;
    case Rescale::kMax: r.distance_scale = max; break;
    case Rescale::kNone: r.distance_scale = 1.0; break;
  }
  for (double& d : dist) d = d / r.distance_scale;

  if (cfg.threshold.kind == ThresholdKind::kFixed) {
    r.epsilon_used = cfg.threshold.value;
  } else {
    const auto target = static_cast<std::size_t>(std::llround(cfg.threshold.value * static_cast<double>(dist.size())));
    const std::size_t k = std::clamp<std::size_t>(target, 1, dist.size());
    std::vector<double> scratch = dist;
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k - 1), scratch.end());
    r.epsilon_used = scratch[k - 1];
  }

  const double eps = r.epsilon_used;
  std::size_t idx = 0;
  for_each_pair([&](std::size_t i, std::size_t j) {
    if (dist[idx++] <= eps) {
      r.set(i, j);
      if (symmetric) r.set(j, i);
    }
  });
  r.refresh_rate();
}

}  // namespace

RecurrenceMatrix build_matrix(const PointCloud& a, const RecurrenceConfig& cfg) {
  cfg.validate();
  if (cfg.mode != RecurrenceMode::kAuto && cfg.mode != RecurrenceMode::kMulti)
    throw InputError("build_matrix handles auto and multi modes; use build_cross_matrix or joint_matrix");
  const std::size_t n = a.size();
  RecurrenceMatrix r(n, n, cfg.mode, cfg.theiler);
  const std::size_t first = cfg.theiler + 1;

  auto for_each_pair = [&](auto&& visit) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + first; j < n; ++j) visit(i, j);
  };
  std::vector<double> dist;
  if (n > first) dist.reserve((n - first) * (n - first + 1) / 2);
  for_each_pair([&](std::size_t i, std::size_t j) { dist.push_back(distance(a.point(i), a.point(j))); });
  threshold_into(r, dist, cfg, true, for_each_pair);
  return r;
}

RecurrenceMatrix build_cross_matrix(const PointCloud& a, const PointCloud& b, const RecurrenceConfig& cfg) {
  cfg.validate();
  if (a.dim() != b.dim()) throw InputError("cross-recurrence trajectories differ in dimension");
  RecurrenceMatrix r(a.size(), b.size(), RecurrenceMode::kCross, 0);
  auto for_each_pair = [&](auto&& visit) {
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) visit(i, j);
  };
  std::vector<double> dist;
  dist.reserve(a.size() * b.size());
  for_each_pair([&](std::size_t i, std::size_t j) { dist.push_back(distance(a.point(i), b.point(j))); });
  threshold_into(r, dist, cfg, false, for_each_pair);
  return r;
}

RecurrenceMatrix joint_matrix(const RecurrenceMatrix& ra, const RecurrenceMatrix& rb) {
  if (ra.rows() != rb.rows() || ra.cols() != rb.cols()) throw InputError("joint recurrence needs equal matrix shapes");
  if (!ra.self_recurrence() || !rb.self_recurrence()) throw InputError("joint recurrence combines self-recurrence matrices");
  RecurrenceMatrix r(ra.rows(), ra.cols(), RecurrenceMode::kJoint, std::max(ra.theiler(), rb.theiler()));
  for (std::size_t i = 0; i < ra.rows(); ++i) {
    const auto* wa = ra.row_words(i);
    const auto* wb = rb.row_words(i);
    for (std::size_t w = 0; w < ra.words_per_row(); ++w) {
      std::uint64_t bits = wa[w] & wb[w];
      while (bits) {
        r.set(i, w * 64 + static_cast<std::size_t>(std::countr_zero(bits)));
        bits &= bits - 1;
      }
    }
  }
  r.d_bar = 0.0;
  r.epsilon_used = std::nan("");
  r.parent_epsilons = {ra.epsilon_used, rb.epsilon_used};
  r.refresh_rate();
  return r;
}

PointCloud multi_embed(const std::vector<Series>& series, std::size_t m, std::size_t tau) {
  if (series.empty()) throw InputError("multidimensional embedding needs at least one series");
  for (const auto& s : series) {
    if (s.size() != series.front().size()) throw InputError("multidimensional series differ in length");
    if (s.rate() != series.front().rate()) throw InputError("multidimensional series differ in sampling rate");
  }
  std::vector<PointCloud> parts;
  for (const auto& s : series) parts.push_back(delay_embed(s, m, tau));
  const std::size_t count = parts.front().size();
  PointCloud out(count, m * series.size());
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t p = 0; p < parts.size(); ++p)
      for (std::size_t d = 0; d < m; ++d) out.at(i, p * m + d) = parts[p].at(i, d);
  return out;
}

std::size_t LineHistogram::lines(std::size_t min_length) const {
  std::size_t total = 0;
  for (std::size_t l = std::max<std::size_t>(min_length, 1); l < counts.size(); ++l) total += counts[l];
  return total;
}

std::size_t LineHistogram::points(std::size_t min_length) const {
  std::size_t total = 0;
  for (std::size_t l = std::max<std::size_t>(min_length, 1); l < counts.size(); ++l) total += l * counts[l];
  return total;
}

namespace {

// Visits every recurrent cell row by row.
template <typename Visit>
void for_each_recurrent(const RecurrenceMatrix& r, Visit&& visit) {
  for (std::size_t i = 0; i < r.rows(); ++i) {
    const auto* words = r.row_words(i);
    for (std::size_t w = 0; w < r.words_per_row(); ++w) {
      std::uint64_t bits = words[w];
      while (bits) {
        visit(i, w * 64 + static_cast<std::size_t>(std::countr_zero(bits)));
        bits &= bits - 1;
      }
    }
  }
}

}  // namespace

LineHistogram diagonal_histogram(const RecurrenceMatrix& r) {
  LineHistogram h;
  h.counts.assign(std::max(r.rows(), r.cols()) + 1, 0);
  for_each_recurrent(r, [&](std::size_t i, std::size_t j) {
    if (i > 0 && j > 0 && r.test(i - 1, j - 1)) return;  // not a line start
    std::size_t len = 1;
    while (i + len < r.rows() && j + len < r.cols() && r.test(i + len, j + len)) ++len;
    ++h.counts[len];
  });
  return h;
}

LineHistogram vertical_histogram(const RecurrenceMatrix& r) {
  LineHistogram h;
  h.counts.assign(r.rows() + 1, 0);
  for_each_recurrent(r, [&](std::size_t i, std::size_t j) {
    if (i > 0 && r.test(i - 1, j)) return;
    std::size_t len = 1;
    while (i + len < r.rows() && r.test(i + len, j)) ++len;
    ++h.counts[len];
  });
  return h;
}

const std::vector<std::string>& RqaMetrics::column_names() {
  static const std::vector<std::string> names{"rr", "det", "lam", "l_mean", "l_max", "l_sd", "entr", "tt", "div"};
  return names;
}

std::vector<std::optional<double>> RqaMetrics::values() const {
  return {rr, det, lam, l_mean, l_max, l_sd, entr, tt, div};
}

RqaMetrics compute_metrics(const RecurrenceMatrix& r, const LineHistogram& diagonal, const LineHistogram& vertical,
                           std::size_t l_min) {
  if (l_min < 1) throw InputError("minimum line length must be positive");
  RqaMetrics out;
  const std::size_t recurrent = r.recurrent_points();
  const std::size_t eligible = r.eligible_cells();
  out.rr = eligible == 0 ? 0.0 : 100.0 * static_cast<double>(recurrent) / static_cast<double>(eligible);
  if (recurrent > 0) {
    out.det = 100.0 * static_cast<double>(diagonal.points(l_min)) / static_cast<double>(recurrent);
    out.lam = 100.0 * static_cast<double>(vertical.points(l_min)) / static_cast<double>(recurrent);
  }

  const std::size_t n_diag = diagonal.lines(l_min);
  if (n_diag > 0) {
    const double lines = static_cast<double>(n_diag);
    const double mean = static_cast<double>(diagonal.points(l_min)) / lines;
    double ss = 0.0, entropy = 0.0, longest = 0.0;
    for (std::size_t l = l_min; l < diagonal.counts.size(); ++l) {
      const auto c = diagonal.counts[l];
      if (c == 0) continue;
      const double len = static_cast<double>(l);
      ss += static_cast<double>(c) * (len - mean) * (len - mean);
      const double p = static_cast<double>(c) / lines;
      entropy -= p * std::log(p);
      longest = len;
    }
    out.l_mean = mean;
    out.l_max = longest;
    if (n_diag > 1) out.l_sd = std::sqrt(ss / (lines - 1.0));
    out.entr = entropy == 0.0 ? 0.0 : entropy;  // avoid -0
    out.div = 1.0 / longest;
  }
  const std::size_t n_vert = vertical.lines(l_min);
  if (n_vert > 0) out.tt = static_cast<double>(vertical.points(l_min)) / static_cast<double>(n_vert);
  return out;
}

RqaMetrics compute_metrics(const RecurrenceMatrix& r, std::size_t l_min) {
  return compute_metrics(r, diagonal_histogram(r), vertical_histogram(r), l_min);
}

namespace {

WindowRqa analyze_window(const std::vector<Series>& series, IndexRange range, const WindowedRqaOptions& opt) {
  std::vector<Series> seg;
  for (const auto& s : series) seg.push_back(normalize(s.slice(range.begin, range.end), opt.normalize));
  const std::size_t m = opt.embedding.m;
  const std::size_t tau = opt.embedding.tau;

  RecurrenceMatrix r;
  switch (opt.config.mode) {
    case RecurrenceMode::kAuto:
      r = build_matrix(delay_embed(seg[0], m, tau), opt.config);
      break;
    case RecurrenceMode::kMulti:
      r = build_matrix(multi_embed(seg, m, tau), opt.config);
      break;
    case RecurrenceMode::kCross:
      r = build_cross_matrix(delay_embed(seg[0], m, tau), delay_embed(seg[1], m, tau), opt.config);
      break;
    case RecurrenceMode::kJoint: {
      RecurrenceConfig ca = opt.config, cb = opt.config_b;
      ca.mode = cb.mode = RecurrenceMode::kAuto;
      r = joint_matrix(build_matrix(delay_embed(seg[0], m, tau), ca), build_matrix(delay_embed(seg[1], m, tau), cb));
      break;
    }
  }

  WindowRqa out;
  out.start = range.begin;
  out.metrics = compute_metrics(r, opt.config.l_min);
  out.d_bar = r.d_bar;
  out.epsilon_used = r.epsilon_used;
  out.embedded_length = r.rows();
  out.short_window = r.rows() < 1000;
  if (opt.keep_matrices) out.matrix = std::move(r);
  return out;
}

void check_inputs(const std::vector<Series>& series, const WindowedRqaOptions& opt) {
  const auto mode = opt.config.mode;
  const std::size_t need = mode == RecurrenceMode::kAuto ? 1 : (mode == RecurrenceMode::kMulti ? 0 : 2);
  if (need > 0 && series.size() != need)
    throw InputError(to_string(mode) + " recurrence needs exactly " + std::to_string(need) + " series");
  if (series.empty()) throw InputError("recurrence analysis needs at least one series");
  for (const auto& s : series)
    if (s.size() != series.front().size()) throw InputError("recurrence inputs differ in length");
  opt.config.validate();
  if (mode == RecurrenceMode::kJoint) opt.config_b.validate();
  if (opt.embedding.m < 1 || opt.embedding.tau < 1) throw InputError("embedding needs m >= 1 and tau >= 1");
}

}  // namespace

std::vector<WindowRqa> windowed_rqa(const std::vector<Series>& series, const WindowedRqaOptions& opt) {
  check_inputs(series, opt);
  const std::size_t minimum = (opt.embedding.m - 1) * opt.embedding.tau + opt.config.l_min + 1;
  if (opt.windows.length < minimum)
    throw InputError("window length " + std::to_string(opt.windows.length) + " is below (m-1)*tau + l_min + 1 = " +
                     std::to_string(minimum));
  const auto ranges = make_windows(series.front().size(), opt.windows);
  return parallel_map(ranges.size(), opt.jobs, [&](std::size_t w) {
    try {
      return analyze_window(series, ranges[w], opt);
    } catch (const DegenerateInputError& e) {
      throw DegenerateInputError("window starting at sample " + std::to_string(ranges[w].begin) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError("window starting at sample " + std::to_string(ranges[w].begin) + ": " + e.what());
    }
  });
}

WindowRqa whole_rqa(const std::vector<Series>& series, const WindowedRqaOptions& opt) {
  check_inputs(series, opt);
  return analyze_window(series, {0, series.front().size()}, opt);
}

std::size_t DifferenceMap::count(CellChange c) const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), c));
}

std::string to_string(RecurrenceMode mode) {
  switch (mode) {
    case RecurrenceMode::kAuto: return "auto";
    case RecurrenceMode::kCross: return "cross";
    case RecurrenceMode::kJoint: return "joint";
    case RecurrenceMode::kMulti: return "multi";
  }
  return "unknown";
}

std::string to_string(Rescale rescale) {
  switch (rescale) {
    case Rescale::kMean: return "mean";
    case Rescale::kMax: return "max";
    case Rescale::kNone: return "none";
  }
  return "unknown";
}

Rescale parse_rescale(const std::string& text) {
  if (text == "mean") return Rescale::kMean;
  if (text == "max") return Rescale::kMax;
  if (text == "none") return Rescale::kNone;
  throw InputError("unknown rescaling '" + text + "' (expected mean, max or none)");
}

}  // namespace posedyn
