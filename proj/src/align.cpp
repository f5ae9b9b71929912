#include "posedyn/align.hpp"

#include <algorithm>
#include <cmath>

#include "posedyn/error.hpp"
#include "posedyn/parallel.hpp"

namespace posedyn {

Template build_template(const std::vector<PoseSequence>& data, const std::vector<std::size_t>& keypoints,
                        bool center_frames) {
  if (data.empty()) throw InputError("template construction needs at least one pose sequence");
  if (keypoints.empty()) throw InputError("template construction needs at least one keypoint");
  const std::size_t dims = data.front().dims();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(keypoints.size()), static_cast<Eigen::Index>(dims));
  std::vector<double> count(keypoints.size(), 0.0);

  for (const auto& p : data) {
    if (p.dims() != dims) throw InputError("template sequences differ in dimensionality");
    for (auto k : keypoints)
      if (k >= p.keypoints()) throw InputError("template keypoint index " + std::to_string(k) + " out of range");
    for (std::size_t f = 0; f < p.frames(); ++f) {
      Eigen::RowVectorXd offset = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(dims));
      if (center_frames) {
        double n = 0.0;
        for (auto k : keypoints) {
          if (!p.valid(f, k)) continue;
          for (std::size_t d = 0; d < dims; ++d) offset(static_cast<Eigen::Index>(d)) += p.coord(f, k, d);
          n += 1.0;
        }
        if (n == 0.0) continue;
        offset /= n;
      }
      for (std::size_t r = 0; r < keypoints.size(); ++r) {
        const auto k = keypoints[r];
        if (!p.valid(f, k)) continue;
        for (std::size_t d = 0; d < dims; ++d)
          sum(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d)) += p.coord(f, k, d) - offset(static_cast<Eigen::Index>(d));
        count[r] += 1.0;
      }
    }
  }

  for (std::size_t r = 0; r < keypoints.size(); ++r) {
    if (count[r] == 0.0)
      throw InputError("template keypoint " + data.front().labels()[keypoints[r]] + " has no valid frames");
    sum.row(static_cast<Eigen::Index>(r)) /= count[r];
  }
  Template t;
  t.points = sum;
  t.keypoints = keypoints;
  t.source = TemplateSource::kGlobalMean;
  t.centroid = sum.colwise().mean();
  return t;
}

Template symmetrize_template(const Template& t, const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                             std::size_t axis) {
  const auto rows = t.points.rows();
  if (axis >= static_cast<std::size_t>(t.points.cols())) throw InputError("symmetry axis out of range");
  std::vector<Eigen::Index> partner(static_cast<std::size_t>(rows));
  for (Eigen::Index r = 0; r < rows; ++r) partner[static_cast<std::size_t>(r)] = r;
  for (auto [a, b] : pairs) {
    if (a >= static_cast<std::size_t>(rows) || b >= static_cast<std::size_t>(rows))
      throw InputError("symmetry pair index out of range");
    partner[a] = static_cast<Eigen::Index>(b);
    partner[b] = static_cast<Eigen::Index>(a);
  }
  const auto ax = static_cast<Eigen::Index>(axis);
  const double midline = t.points.col(ax).mean();
  Template out = t;
  for (Eigen::Index r = 0; r < rows; ++r) {
    Eigen::RowVectorXd mirrored = t.points.row(partner[static_cast<std::size_t>(r)]);
    mirrored(ax) = 2.0 * midline - mirrored(ax);
    out.points.row(r) = 0.5 * (t.points.row(r) + mirrored);
  }
  out.centroid = out.points.colwise().mean();
  return out;
}

ProcrustesTransform ProcrustesTransform::identity(std::size_t dims) {
  const auto d = static_cast<Eigen::Index>(dims);
  return {1.0, Eigen::MatrixXd::Identity(d, d), Eigen::RowVectorXd::Zero(d)};
}

Eigen::MatrixXd ProcrustesTransform::apply(const Eigen::MatrixXd& points) const {
  Eigen::MatrixXd out = scale * points * rotation;
  out.rowwise() += translation;
  return out;
}

ProcrustesTransform ProcrustesTransform::inverse() const {
  ProcrustesTransform inv;
  inv.scale = 1.0 / scale;
  inv.rotation = rotation.transpose();
  inv.translation = -(translation * inv.rotation) * inv.scale;
  return inv;
}

ProcrustesTransform ProcrustesTransform::then(const ProcrustesTransform& other) const {
  ProcrustesTransform out;
  out.scale = scale * other.scale;
  out.rotation = rotation * other.rotation;
  out.translation = other.scale * translation * other.rotation + other.translation;
  return out;
}

double ProcrustesTransform::deviation_from_identity() const {
  const auto d = rotation.rows();
  const Eigen::MatrixXd linear = scale * rotation - Eigen::MatrixXd::Identity(d, d);
  return std::sqrt(linear.squaredNorm() + translation.squaredNorm());
}

namespace {

void require_spread(const Eigen::MatrixXd& centered, const char* what) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
  const auto& sv = svd.singularValues();
  if (sv.size() < 2 || !(sv(0) > 0.0) || sv(1) <= 1e-12 * sv(0))
    throw DegenerateInputError(std::string(what) + " configuration is coincident or collinear");
}

}  // namespace

ProcrustesTransform fit_procrustes(const Eigen::MatrixXd& x, const Eigen::MatrixXd& t, bool allow_scale) {
  if (x.rows() != t.rows() || x.cols() != t.cols()) throw InputError("Procrustes inputs differ in shape");
  const auto dims = x.cols();
  if (x.rows() < dims + 1)
    throw InputError("Procrustes fit needs at least " + std::to_string(dims + 1) + " points");

  const Eigen::RowVectorXd mx = x.colwise().mean();
  const Eigen::RowVectorXd mt = t.colwise().mean();
  const Eigen::MatrixXd xc = x.rowwise() - mx;
  const Eigen::MatrixXd tc = t.rowwise() - mt;
  require_spread(xc, "pose");
  require_spread(tc, "template");

  const Eigen::MatrixXd cross = xc.transpose() * tc;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::VectorXd sign = Eigen::VectorXd::Ones(dims);
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) sign(dims - 1) = -1.0;

  ProcrustesTransform tf;
  tf.rotation = svd.matrixU() * sign.asDiagonal() * svd.matrixV().transpose();
  tf.scale = allow_scale ? svd.singularValues().dot(sign) / xc.squaredNorm() : 1.0;
  tf.translation = mt - tf.scale * mx * tf.rotation;
  return tf;
}

PoseSequence apply_transform(const PoseSequence& p, const ProcrustesTransform& tf, IndexRange range) {
  if (range.end > p.frames() || range.begin > range.end) throw InputError("transform frame range out of bounds");
  if (static_cast<std::size_t>(tf.rotation.rows()) != p.dims()) throw InputError("transform dims differ from pose dims");
  PoseSequence out = p;
  const auto dims = static_cast<Eigen::Index>(p.dims());
  Eigen::RowVectorXd x(dims);
  for (std::size_t f = range.begin; f < range.end; ++f) {
    for (std::size_t k = 0; k < p.keypoints(); ++k) {
      if (!p.valid(f, k)) continue;
      for (Eigen::Index d = 0; d < dims; ++d) x(d) = p.coord(f, k, static_cast<std::size_t>(d));
      const Eigen::RowVectorXd y = tf.scale * x * tf.rotation + tf.translation;
      for (Eigen::Index d = 0; d < dims; ++d) out.coord(f, k, static_cast<std::size_t>(d)) = y(d);
    }
  }
  return out;
}

FrameSelection select_frame(const PoseSequence& p, std::size_t frame, const Template& t) {
  const auto dims = static_cast<Eigen::Index>(p.dims());
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < t.keypoints.size(); ++r)
    if (p.valid(frame, t.keypoints[r])) rows.push_back(r);
  FrameSelection sel{Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), dims),
                     Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), dims)};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto k = t.keypoints[rows[i]];
    for (Eigen::Index d = 0; d < dims; ++d) {
      sel.points(static_cast<Eigen::Index>(i), d) = p.coord(frame, k, static_cast<std::size_t>(d));
      sel.target(static_cast<Eigen::Index>(i), d) = t.points(static_cast<Eigen::Index>(rows[i]), d);
    }
  }
  return sel;
}

FrameAlignment align_frames(const PoseSequence& p, const Template& t, bool allow_scale, std::size_t jobs) {
  if (static_cast<std::size_t>(t.points.cols()) != p.dims()) throw InputError("template dims differ from pose dims");
  auto fits = parallel_map(p.frames(), jobs, [&](std::size_t f) -> std::optional<ProcrustesTransform> {
    const auto sel = select_frame(p, f, t);
    if (sel.points.rows() < sel.points.cols() + 1) return std::nullopt;
    try {
      return fit_procrustes(sel.points, sel.target, allow_scale);
    } catch (const DegenerateInputError&) {
      return std::nullopt;
    }
  });

  FrameAlignment out{p, std::move(fits)};
  for (std::size_t f = 0; f < p.frames(); ++f) {
    if (out.transforms[f]) {
      out.aligned = apply_transform(out.aligned, *out.transforms[f], {f, f + 1});
    } else {
      for (std::size_t k = 0; k < p.keypoints(); ++k) out.aligned.set_valid(f, k, false);
    }
  }
  return out;
}

std::vector<WindowAlignment> align_windows(const PoseSequence& p, const Template& t, const WindowSpec& windows,
                                           bool allow_scale, std::optional<std::size_t> center_on, std::size_t jobs) {
  if (static_cast<std::size_t>(t.points.cols()) != p.dims()) throw InputError("template dims differ from pose dims");
  if (center_on && *center_on >= p.keypoints()) throw InputError("centering keypoint out of range");
  const auto ranges = make_windows(p.frames(), windows);
  const auto dims = p.dims();

  return parallel_map(ranges.size(), jobs, [&](std::size_t w) {
    const auto range = ranges[w];
    PoseSequence seg = p.slice_frames(range.begin, range.end);
    if (center_on) {
      std::vector<double> mean(dims, 0.0);
      double n = 0.0;
      for (std::size_t f = 0; f < seg.frames(); ++f) {
        if (!seg.valid(f, *center_on)) continue;
        for (std::size_t d = 0; d < dims; ++d) mean[d] += seg.coord(f, *center_on, d);
        n += 1.0;
      }
      if (n == 0.0)
        throw InputError("window at frame " + std::to_string(range.begin) + " has no valid centering keypoint");
      for (std::size_t f = 0; f < seg.frames(); ++f)
        for (std::size_t k = 0; k < seg.keypoints(); ++k)
          for (std::size_t d = 0; d < dims; ++d) seg.coord(f, k, d) -= mean[d] / n;
    }

    std::vector<Eigen::Index> rows;
    Eigen::MatrixXd mean_pose(static_cast<Eigen::Index>(t.keypoints.size()), static_cast<Eigen::Index>(dims));
    for (std::size_t r = 0; r < t.keypoints.size(); ++r) {
      const auto k = t.keypoints[r];
      double n = 0.0;
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(dims));
      for (std::size_t f = 0; f < seg.frames(); ++f) {
        if (!seg.valid(f, k)) continue;
        for (std::size_t d = 0; d < dims; ++d) acc(static_cast<Eigen::Index>(d)) += seg.coord(f, k, d);
        n += 1.0;
      }
      if (n == 0.0) continue;
      mean_pose.row(static_cast<Eigen::Index>(rows.size())) = acc / n;
      rows.push_back(static_cast<Eigen::Index>(r));
    }
    Eigen::MatrixXd target(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dims));
    for (std::size_t i = 0; i < rows.size(); ++i) target.row(static_cast<Eigen::Index>(i)) = t.points.row(rows[i]);
    const Eigen::MatrixXd x = mean_pose.topRows(static_cast<Eigen::Index>(rows.size()));

    ProcrustesTransform tf;
    try {
      tf = fit_procrustes(x, target, allow_scale);
    } catch (const InputError& e) {
      throw InputError("window at frame " + std::to_string(range.begin) + ": " + e.what());
    }
    return WindowAlignment{range.begin, apply_transform(seg, tf, {0, seg.frames()}), tf};
  });
}

double rotation_angle(const Eigen::MatrixXd& r) {
  if (r.rows() == 2) return std::atan2(r(0, 1), r(0, 0));
  const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

TransformFeatures transform_features(const std::vector<std::optional<ProcrustesTransform>>& transforms, double rate,
                                     const MotionWeights& weights) {
  const std::size_t n = transforms.size();
  std::size_t dims = 2;
  for (const auto& tf : transforms)
    if (tf) {
      dims = static_cast<std::size_t>(tf->rotation.rows());
      break;
    }

  auto blank = [&] { return Series(std::vector<double>(n, 0.0), std::vector<std::uint8_t>(n, 0), rate); };
  TransformFeatures out{blank(), blank(), dims == 3 ? blank() : Series({}, rate), blank(), blank(), blank(), blank()};

  for (std::size_t k = 0; k < n; ++k) {
    if (!transforms[k]) continue;
    const auto& tf = *transforms[k];
    out.tx.set(k, tf.translation(0));
    out.ty.set(k, tf.translation(1));
    if (dims == 3) out.tz.set(k, tf.translation(2));
    out.translation.set(k, tf.translation.norm());
    out.angle.set(k, rotation_angle(tf.rotation));
    out.scale.set(k, tf.scale);
  }

  // Per-frame changes of each component.
  std::vector<double> dt(n, 0.0), da(n, 0.0), ds(n, 0.0);
  std::vector<std::uint8_t> ok(n, 0);
  for (std::size_t k = 1; k < n; ++k) {
    if (!transforms[k] || !transforms[k - 1]) continue;
    dt[k] = (transforms[k]->translation - transforms[k - 1]->translation).norm();
    da[k] = std::abs(out.angle[k] - out.angle[k - 1]);
    ds[k] = std::abs(out.scale[k] - out.scale[k - 1]);
    ok[k] = 1;
  }
  auto spread = [&](const std::vector<double>& v) {
    double sum = 0.0, count = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (ok[k]) {
        sum += v[k];
        count += 1.0;
      }
    if (count == 0.0) return 0.0;
    const double mean = sum / count;
    double ss = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (ok[k]) ss += (v[k] - mean) * (v[k] - mean);
    return std::sqrt(ss / count);
  };
  const double st = spread(dt), sa = spread(da), ss = spread(ds);
  for (std::size_t k = 0; k < n; ++k) {
    if (!ok[k]) continue;
    double m = 0.0;
    if (st > 0.0) m += weights.translation * dt[k] / st;
    if (sa > 0.0) m += weights.rotation * da[k] / sa;
    if (ss > 0.0) m += weights.scale * ds[k] / ss;
    out.motion.set(k, m);
  }
  return out;
}

}  // namespace posedyn
