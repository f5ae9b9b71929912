#include "posedyn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>

#include <json.hpp>

#include "posedyn/embedding.hpp"
#include "posedyn/error.hpp"
#include "posedyn/pca.hpp"

namespace posedyn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

Cell opt_cell(const Series& s, std::size_t i) {
  if (s.empty() || i >= s.size() || !s.valid(i)) return std::monostate{};
  return s[i];
}

Cell count_cell(std::size_t v) { return static_cast<std::int64_t>(v); }

std::string gap_tag(double mult) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%gtau", mult);
  return buf;
}

// ---- JSON helpers ----

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw InputError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw InputError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError(where + ": '" + key + "' is missing or has the wrong type");
  }
}

template <typename T>
std::optional<T> get_opt(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  return get<T>(obj, key, where);
}

std::size_t get_size(const json& obj, const char* key, const std::string& where) {
  const auto& v = obj.contains(key) ? obj.at(key) : json();
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw InputError(where + ": '" + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

std::optional<std::size_t> get_size_opt(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  return get_size(obj, key, where);
}

KeypointRef keypoint_from_json(const json& v, const std::string& where) {
  if (v.is_number_integer() && v.get<long long>() >= 0) return {{}, v.get<std::size_t>()};
  if (v.is_string()) return parse_keypoint_ref(v.get<std::string>());
  throw InputError(where + ": keypoint references are labels or indices");
}

std::vector<KeypointRef> keypoints_from_json(const json& obj, const char* key, const std::string& where) {
  std::vector<KeypointRef> out;
  if (!obj.contains(key)) return out;
  if (!obj.at(key).is_array()) throw InputError(where + ": '" + key + "' must be an array");
  for (const auto& v : obj.at(key)) out.push_back(keypoint_from_json(v, where));
  return out;
}

std::vector<std::pair<KeypointRef, KeypointRef>> pairs_from_json(const json& obj, const char* key,
                                                                 const std::string& where) {
  std::vector<std::pair<KeypointRef, KeypointRef>> out;
  if (!obj.contains(key)) return out;
  if (!obj.at(key).is_array()) throw InputError(where + ": '" + key + "' must be an array of pairs");
  for (const auto& p : obj.at(key)) {
    if (!p.is_array() || p.size() != 2) throw InputError(where + ": '" + key + "' entries must be pairs");
    out.emplace_back(keypoint_from_json(p[0], where), keypoint_from_json(p[1], where));
  }
  return out;
}

WindowRequest window_from_json(const json& v, const std::string& where) {
  if (v.is_string()) return parse_window_request(v.get<std::string>());
  check_keys(v, where, {"length", "seconds", "overlap"});
  WindowRequest w;
  if (v.contains("length")) w.length = get_size(v, "length", where);
  if (v.contains("seconds")) w.seconds = get<double>(v, "seconds", where);
  w.overlap = get_opt<double>(v, "overlap", where).value_or(0.0);
  if ((w.length == 0) == (w.seconds <= 0.0)) throw InputError(where + ": give exactly one of length or seconds");
  if (!(w.overlap >= 0.0 && w.overlap < 1.0)) throw InputError(where + ": overlap must lie in [0, 1)");
  return w;
}

Threshold threshold_from_json(const json& v, const std::string& where) {
  if (v.is_number()) return Threshold::fixed(v.get<double>());
  if (v.is_string()) return Threshold::parse(v.get<std::string>());
  throw InputError(where + ": radius must be a number or 'fixed:V' / 'rr:P'");
}

FeatureSpec feature_from_json(const json& v, std::size_t index) {
  const std::string where = "feature " + std::to_string(index);
  check_keys(v, where, {"name", "kind", "keypoints", "pairs", "set_a", "set_b", "axis"});
  FeatureSpec f;
  f.name = get<std::string>(v, "name", where);
  f.kind = get<std::string>(v, "kind", where);
  if (f.name.empty() || f.name.find_first_of("/\\,") != std::string::npos)
    throw InputError(where + ": feature names must be non-empty and free of '/', '\\' and ','");
  f.keypoints = keypoints_from_json(v, "keypoints", where);
  f.pairs = pairs_from_json(v, "pairs", where);
  f.set_a = keypoints_from_json(v, "set_a", where);
  f.set_b = keypoints_from_json(v, "set_b", where);
  f.axis = get_size_opt(v, "axis", where);
  if (!f.from_transforms()) parse_feature_kind(f.kind);
  return f;
}

json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(what + " is not valid JSON: " + e.what());
  }
}

// Series stored under "<input label>.<feature name>".
struct NamedStore {
  std::map<std::string, Series> series;
  const Series& at(const std::string& name) const {
    auto it = series.find(name);
    if (it == series.end()) throw InputError("unknown series '" + name + "'");
    return it->second;
  }
};

std::vector<Series> common_length(std::vector<Series> s) {
  std::size_t n = SIZE_MAX;
  for (const auto& x : s) n = std::min(n, x.size());
  for (auto& x : s)
    if (x.size() > n) x = x.slice(0, n);
  return s;
}

template <typename F>
auto in_stage(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

}  // namespace

// ---- references ----

std::size_t KeypointRef::resolve(const PoseSequence& p) const {
  if (index) {
    if (*index >= p.keypoints())
      throw InputError("keypoint index " + std::to_string(*index) + " out of range (" +
                       std::to_string(p.keypoints()) + " keypoints)");
    return *index;
  }
  const auto& labels = p.labels();
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it != labels.end()) return static_cast<std::size_t>(it - labels.begin());
  if (all_digits(label)) {
    const auto i = std::stoull(label);
    if (i < p.keypoints()) return i;
  }
  throw InputError("unknown keypoint '" + label + "'");
}

KeypointRef parse_keypoint_ref(const std::string& text) {
  if (text.empty()) throw InputError("empty keypoint reference");
  return {text, std::nullopt};
}

WindowSpec WindowRequest::resolve(double rate) const {
  WindowSpec w;
  w.length = length ? length : static_cast<std::size_t>(std::llround(seconds * rate));
  w.overlap = overlap;
  w.validate();
  return w;
}

WindowRequest parse_window_request(const std::string& text) {
  const auto comma = text.find(',');
  std::string len = text.substr(0, comma);
  WindowRequest w;
  try {
    if (!len.empty() && len.back() == 's') {
      w.seconds = std::stod(len.substr(0, len.size() - 1));
      if (!(w.seconds > 0.0)) throw InputError("");
    } else {
      if (!all_digits(len)) throw InputError("");
      w.length = std::stoull(len);
    }
    w.overlap = comma == std::string::npos ? 0.0 : std::stod(text.substr(comma + 1));
  } catch (const std::exception&) {
    throw InputError("window must be 'L,overlap' or 'Ss,overlap' (got '" + text + "')");
  }
  if (!(w.overlap >= 0.0 && w.overlap < 1.0)) throw InputError("window overlap must lie in [0, 1)");
  return w;
}

// ---- preprocess ----

PreprocessResult preprocess_pose(const PoseSequence& input, const PreprocessOptions& opt) {
  PoseSequence p = opt.confidence_min ? mask_low_confidence(input, *opt.confidence_min) : input;
  PreprocessResult out;
  out.gaps.columns = {"keypoint", "start", "length", "filled", "edge"};

  std::vector<std::vector<Series>> axes(p.keypoints());
  for (std::size_t k = 0; k < p.keypoints(); ++k)
    for (std::size_t d = 0; d < p.dims(); ++d) {
      Series s = p.axis_series(k, d);
      if (opt.max_gap && s.count_valid() >= 2) {
        auto filled = interpolate_gaps(s, GapPolicy{*opt.max_gap});
        if (d == 0)
          for (const auto& g : filled.gaps)
            out.gaps.add_row({p.labels()[k], count_cell(g.start), count_cell(g.length),
                              static_cast<std::int64_t>(g.filled), static_cast<std::int64_t>(g.edge)});
        s = std::move(filled.series);
      }
      if (opt.filter && s.count_valid() >= 2) s = lowpass_with_gaps(s, *opt.filter);
      axes[k].push_back(std::move(s));
    }

  double rate = p.rate();
  std::size_t frames = p.frames();
  if (opt.resample_rate && *opt.resample_rate != p.rate()) {
    rate = *opt.resample_rate;
    for (auto& ax : axes)
      for (auto& s : ax) s = resample(s, rate, opt.resample_method);
    frames = axes.empty() ? 0 : axes[0][0].size();
  }
  if (opt.normalize != NormalizeMode::kNone)
    for (std::size_t k = 0; k < axes.size(); ++k)
      for (auto& s : axes[k]) {
        if (s.count_valid() == 0) continue;
        try {
          s = normalize(s, opt.normalize);
        } catch (const InputError& e) {
          throw InputError("keypoint " + p.labels()[k] + ": " + e.what());
        }
      }

  out.pose = PoseSequence(frames, p.keypoints(), p.dims(), rate, p.labels());
  for (std::size_t k = 0; k < p.keypoints(); ++k) {
    for (std::size_t d = 0; d < p.dims(); ++d) out.pose.set_axis_series(k, d, axes[k][d]);
    for (std::size_t f = 0; f < frames; ++f) {
      // Confidence follows the nearest source frame.
      auto src = static_cast<std::size_t>(std::llround(static_cast<double>(f) * p.rate() / rate));
      out.pose.confidence(f, k) = p.confidence(std::min(src, p.frames() - 1), k);
    }
  }
  return out;
}

// ---- align ----

AlignResult align_poses(const std::vector<PoseSequence>& poses, const AlignOptions& opt, std::size_t jobs) {
  if (poses.empty()) throw InputError("alignment needs at least one pose sequence");
  const PoseSequence& ref = poses.front();
  std::vector<std::size_t> idx;
  if (opt.keypoints.empty()) {
    for (std::size_t k = 0; k < ref.keypoints(); ++k) idx.push_back(k);
  } else {
    for (const auto& r : opt.keypoints) idx.push_back(r.resolve(ref));
  }
  for (const auto& p : poses) {
    if (p.dims() != ref.dims() || p.keypoints() != ref.keypoints())
      throw InputError("aligned inputs must share keypoint count and dimensionality");
  }

  AlignResult out;
  out.tmpl = opt.template_file ? read_template_csv(*opt.template_file, ref) : build_template(poses, idx, opt.center_frames);
  if (!opt.symmetrize.empty()) {
    std::vector<std::pair<std::size_t, std::size_t>> rows;
    auto row_of = [&](const KeypointRef& r) {
      const auto k = r.resolve(ref);
      auto it = std::find(out.tmpl.keypoints.begin(), out.tmpl.keypoints.end(), k);
      if (it == out.tmpl.keypoints.end()) throw InputError("symmetry keypoint '" + r.text() + "' is not a template point");
      return static_cast<std::size_t>(it - out.tmpl.keypoints.begin());
    };
    for (const auto& [a, b] : opt.symmetrize) rows.emplace_back(row_of(a), row_of(b));
    out.tmpl = symmetrize_template(out.tmpl, rows, 0);
  }

  const bool three_d = ref.dims() == 3;
  for (const auto& p : poses) {
    Table t;
    if (opt.scope == AlignScope::kFrame) {
      auto fa = align_frames(p, out.tmpl, opt.allow_scale, jobs);
      auto tf = transform_features(fa.transforms, p.rate(), opt.motion);
      t.columns = {"frame", "fitted", "scale", "angle", "tx", "ty"};
      if (three_d) t.columns.push_back("tz");
      t.columns.push_back("motion");
      for (std::size_t f = 0; f < p.frames(); ++f) {
        std::vector<Cell> row{count_cell(f), static_cast<std::int64_t>(fa.transforms[f].has_value()),
                              opt_cell(tf.scale, f), opt_cell(tf.angle, f), opt_cell(tf.tx, f), opt_cell(tf.ty, f)};
        if (three_d) row.push_back(opt_cell(tf.tz, f));
        row.push_back(opt_cell(tf.motion, f));
        t.add_row(std::move(row));
      }
      out.aligned.push_back(std::move(fa.aligned));
      out.motion.push_back(std::move(tf));
    } else {
      if (!opt.windows) throw InputError("window-scoped alignment needs windows");
      const WindowSpec spec = opt.windows->resolve(p.rate());
      std::optional<std::size_t> center;
      if (opt.center_on) center = opt.center_on->resolve(p);
      const auto wa = align_windows(p, out.tmpl, spec, opt.allow_scale, center, jobs);
      const std::size_t keep = wa.back().start + spec.length;
      PoseSequence stitched = p.slice_frames(0, keep);
      const double half = static_cast<double>(spec.length) / 2.0;
      std::size_t w = 0;
      for (std::size_t f = 0; f < keep; ++f) {
        // Windows are ordered, so the best window index never decreases.
        while (w + 1 < wa.size() && wa[w + 1].start <= f &&
               std::abs(static_cast<double>(f) - (static_cast<double>(wa[w + 1].start) + half)) <
                   std::abs(static_cast<double>(f) - (static_cast<double>(wa[w].start) + half)))
          ++w;
        const auto& seg = wa[w].aligned;
        const std::size_t lf = f - wa[w].start;
        for (std::size_t k = 0; k < p.keypoints(); ++k) {
          for (std::size_t d = 0; d < p.dims(); ++d) stitched.coord(f, k, d) = seg.coord(lf, k, d);
          stitched.set_valid(f, k, seg.valid(lf, k));
        }
      }
      t.columns = {"window_start", "scale", "angle", "tx", "ty"};
      if (three_d) t.columns.push_back("tz");
      for (const auto& a : wa) {
        std::vector<Cell> row{count_cell(a.start), a.transform.scale, rotation_angle(a.transform.rotation),
                              a.transform.translation(0), a.transform.translation(1)};
        if (three_d) row.push_back(a.transform.translation(2));
        t.add_row(std::move(row));
      }
      out.aligned.push_back(std::move(stitched));
      out.motion.push_back(std::nullopt);
    }
    out.transforms.push_back(std::move(t));
  }
  return out;
}

// ---- features ----

bool FeatureSpec::from_transforms() const { return kind.rfind("head_", 0) == 0; }

FeatureDef FeatureSpec::resolve(const PoseSequence& p) const {
  FeatureDef def;
  def.name = name;
  def.kind = parse_feature_kind(kind);
  for (const auto& k : keypoints) def.keypoints.push_back(k.resolve(p));
  for (const auto& [a, b] : pairs) def.pairs.emplace_back(a.resolve(p), b.resolve(p));
  for (const auto& k : set_a) def.set_a.push_back(k.resolve(p));
  for (const auto& k : set_b) def.set_b.push_back(k.resolve(p));
  def.axis = axis;
  def.validate(p);
  return def;
}

std::vector<FeatureSpec> parse_feature_specs(const std::string& json_text) {
  json doc = parse_json_text(json_text, "feature definition file");
  if (doc.is_object() && doc.contains("features")) doc = doc["features"];
  if (!doc.is_array()) throw InputError("feature definitions must be an array");
  std::vector<FeatureSpec> out;
  std::set<std::string> names;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    out.push_back(feature_from_json(doc[i], i));
    if (!names.insert(out.back().name).second) throw InputError("duplicate feature name '" + out.back().name + "'");
  }
  return out;
}

Series compute_feature(const FeatureSpec& spec, const PoseSequence& p, const std::optional<TransformFeatures>& motion) {
  if (!spec.from_transforms()) return extract_feature(p, spec.resolve(p));
  if (!motion) throw InputError("feature '" + spec.name + "' needs frame-scoped alignment");
  // a change series, like magnitude: frame 0 has no predecessor
  if (spec.kind == "head_motion") return motion->motion.size() ? motion->motion.slice(1, motion->motion.size()) : motion->motion;
  if (spec.kind == "head_translation") return motion->translation;
  if (spec.kind == "head_angle") return motion->angle;
  if (spec.kind == "head_scale") return motion->scale;
  throw InputError("unknown feature kind '" + spec.kind + "'");
}

Table kinematic_table(const std::vector<KinematicSummary>& rows) {
  Table t;
  t.columns = {"window_start", "flagged"};
  for (const char* q : {"displacement", "velocity", "acceleration"})
    for (const char* s : {"mean", "sd", "max", "rms"}) t.columns.push_back(std::string(q) + "_" + s);
  for (const auto& r : rows) {
    std::vector<Cell> row{count_cell(r.start), static_cast<std::int64_t>(r.flagged)};
    for (const auto* s : {&r.displacement, &r.velocity, &r.acceleration}) {
      const bool any = s->n_valid > 0;
      row.push_back(any ? Cell(s->mean) : Cell());
      row.push_back(s->n_valid > 1 ? Cell(s->sd) : Cell());
      row.push_back(any ? Cell(s->max) : Cell());
      row.push_back(any ? Cell(s->rms) : Cell());
    }
    t.add_row(std::move(row));
  }
  return t;
}

Table crosscorr_table(const Series& a, const Series& b, const WindowSpec& windows, std::size_t max_lag) {
  const auto pair = common_length({a, b});
  Table t;
  t.columns = {"window_start", "lag0", "peak_lag", "peak_r"};
  for (const auto& r : make_windows(pair[0].size(), windows)) {
    CrossCorrelation cc;
    try {
      cc = crosscorr(pair[0].slice(r.begin, r.end), pair[1].slice(r.begin, r.end), max_lag);
    } catch (const InputError& e) {
      throw InputError("window starting at sample " + std::to_string(r.begin) + ": " + e.what());
    }
    const long peak = cc.argmax();
    const auto pos = static_cast<std::size_t>(peak + static_cast<long>(max_lag));
    t.add_row({count_cell(r.begin), cc.lag0, static_cast<std::int64_t>(peak), cc.values[pos]});
  }
  return t;
}

// ---- rqa ----

WindowedRqaOptions RqaOptions::resolve(double rate, std::size_t jobs) const {
  WindowedRqaOptions w;
  w.embedding = {m, tau, theiler, l_min};
  w.embedding.validate();
  w.config.mode = mode;
  w.config.threshold = radius;
  w.config.rescale = rescale;
  w.config.theiler = theiler;
  w.config.l_min = l_min;
  w.config.validate();
  w.config_b = w.config;
  if (radius_b) w.config_b.threshold = *radius_b;
  w.normalize = normalize;
  w.jobs = jobs;
  w.keep_matrices = plots;
  if (windows) w.windows = windows->resolve(rate);
  return w;
}

std::vector<WindowRqa> run_rqa(const std::vector<Series>& series, const RqaOptions& opt, std::size_t jobs) {
  if (series.empty()) throw InputError("recurrence analysis needs at least one series");
  const auto s = common_length(series);
  const auto w = opt.resolve(s.front().rate(), jobs);
  if (opt.windows) return windowed_rqa(s, w);
  return {whole_rqa(s, w)};
}

Table rqa_table(const std::vector<WindowRqa>& windows) {
  Table t;
  t.columns = {"window_start", "embedded_length", "short_window", "d_bar", "epsilon"};
  for (const auto& c : RqaMetrics::column_names()) t.columns.push_back(c);
  for (const auto& w : windows) {
    std::vector<Cell> row{count_cell(w.start), count_cell(w.embedded_length), static_cast<std::int64_t>(w.short_window),
                          w.d_bar, w.epsilon_used};
    for (const auto& v : w.metrics.values()) row.push_back(v ? Cell(*v) : Cell());
    t.add_row(std::move(row));
  }
  return t;
}

Table gapsim_summary_table(const GapSimResult& r) {
  Table t;
  t.columns = {"gap_multiple", "gap_length", "rr_error_mean", "rr_error_sd", "det_error_mean", "det_error_sd"};
  for (const auto& g : r.gaps)
    t.add_row({g.multiple, count_cell(g.length), g.rr_error_mean, g.rr_error_sd, g.det_error_mean, g.det_error_sd});
  return t;
}

Table gapsim_trials_table(const GapSimResult& r) {
  Table t;
  t.columns = {"gap_multiple", "trial", "gap_start", "baseline_rr", "rr", "rr_error", "baseline_det", "det", "det_error"};
  for (const auto& g : r.gaps)
    for (std::size_t i = 0; i < g.rr.size(); ++i)
      t.add_row({g.multiple, count_cell(i), count_cell(g.gap_start[i]), r.baseline_rr[i], g.rr[i], g.rr_error[i],
                 r.baseline_det[i], g.det[i], g.det_error[i]});
  return t;
}

// ---- run configuration ----

RunConfig parse_run_config(const std::string& json_text, const fs::path& base_dir) {
  const json doc = parse_json_text(json_text, "run configuration");
  check_keys(doc, "config",
             {"inputs", "output", "seed", "jobs", "preprocess", "align", "features", "linear", "rqa", "pca",
              "simulate_gaps"});
  RunConfig cfg;
  cfg.source_text = json_text;
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) throw InputError("config: 'seed' must be a non-negative integer");
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }
  cfg.jobs = get_size_opt(doc, "jobs", "config");
  if (doc.contains("output")) cfg.output = get<std::string>(doc, "output", "config");

  if (doc.contains("inputs")) {
    if (!doc["inputs"].is_array()) throw InputError("config: 'inputs' must be an array");
    std::set<std::string> labels;
    for (std::size_t i = 0; i < doc["inputs"].size(); ++i) {
      const auto& v = doc["inputs"][i];
      const std::string where = "input " + std::to_string(i);
      check_keys(v, where, {"path", "format", "rate", "person", "keypoint_field", "label"});
      InputSpec in;
      in.path = get<std::string>(v, "path", where);
      if (in.path.is_relative() && !base_dir.empty()) in.path = base_dir / in.path;
      in.load.format = parse_pose_format(get_opt<std::string>(v, "format", where).value_or("csv"));
      in.load.rate = get<double>(v, "rate", where);
      if (!(in.load.rate > 0.0)) throw InputError(where + ": rate must be positive");
      in.load.person = get_size_opt(v, "person", where).value_or(0);
      in.load.keypoint_field = get_opt<std::string>(v, "keypoint_field", where).value_or("pose_keypoints_2d");
      in.label = get_opt<std::string>(v, "label", where).value_or("input" + std::to_string(i));
      if (in.label.empty() || in.label.find_first_of("/\\.,") != std::string::npos)
        throw InputError(where + ": labels must be non-empty and free of '/', '\\', '.' and ','");
      if (!labels.insert(in.label).second) throw InputError(where + ": duplicate label '" + in.label + "'");
      cfg.inputs.push_back(std::move(in));
    }
  }

  if (doc.contains("preprocess")) {
    const auto& v = doc["preprocess"];
    check_keys(v, "preprocess", {"confidence_min", "max_gap", "filter", "resample", "normalize"});
    PreprocessOptions p;
    p.confidence_min = get_opt<double>(v, "confidence_min", "preprocess");
    p.max_gap = get_size_opt(v, "max_gap", "preprocess");
    if (v.contains("filter")) {
      const auto& f = v["filter"];
      check_keys(f, "preprocess.filter", {"cutoff", "order"});
      FilterSpec spec;
      spec.cutoff = get<double>(f, "cutoff", "preprocess.filter");
      spec.order = static_cast<int>(get_size_opt(f, "order", "preprocess.filter").value_or(4));
      if (spec.order < 2 || spec.order % 2 != 0) throw InputError("preprocess.filter: order must be even and >= 2");
      if (!(spec.cutoff > 0.0)) throw InputError("preprocess.filter: cutoff must be positive");
      p.filter = spec;
    }
    if (v.contains("resample")) {
      const auto& r = v["resample"];
      check_keys(r, "preprocess.resample", {"rate", "method"});
      p.resample_rate = get<double>(r, "rate", "preprocess.resample");
      if (!(*p.resample_rate > 0.0)) throw InputError("preprocess.resample: rate must be positive");
      p.resample_method = parse_resample_method(get_opt<std::string>(r, "method", "preprocess.resample").value_or("cubic"));
    }
    p.normalize = parse_normalize_mode(get_opt<std::string>(v, "normalize", "preprocess").value_or("none"));
    cfg.preprocess = p;
  }

  if (doc.contains("align")) {
    const auto& v = doc["align"];
    check_keys(v, "align", {"keypoints", "scope", "allow_scale", "center_frames", "center_on", "windows", "symmetrize",
                            "template", "motion_weights"});
    AlignOptions a;
    a.keypoints = keypoints_from_json(v, "keypoints", "align");
    const auto scope = get_opt<std::string>(v, "scope", "align").value_or("frame");
    if (scope == "frame") a.scope = AlignScope::kFrame;
    else if (scope == "window") a.scope = AlignScope::kWindow;
    else throw InputError("align: scope must be frame or window");
    a.allow_scale = get_opt<bool>(v, "allow_scale", "align").value_or(false);
    a.center_frames = get_opt<bool>(v, "center_frames", "align").value_or(false);
    if (v.contains("center_on")) a.center_on = keypoint_from_json(v["center_on"], "align");
    if (v.contains("windows")) a.windows = window_from_json(v["windows"], "align.windows");
    if (a.scope == AlignScope::kWindow && !a.windows) throw InputError("align: window scope needs windows");
    a.symmetrize = pairs_from_json(v, "symmetrize", "align");
    if (v.contains("template")) {
      const auto t = get<std::string>(v, "template", "align");
      if (t != "global") {
        fs::path tp = t;
        if (tp.is_relative() && !base_dir.empty()) tp = base_dir / tp;
        a.template_file = tp;
      }
    }
    if (v.contains("motion_weights")) {
      const auto& w = v["motion_weights"];
      check_keys(w, "align.motion_weights", {"translation", "rotation", "scale"});
      a.motion.translation = get_opt<double>(w, "translation", "align.motion_weights").value_or(1.0);
      a.motion.rotation = get_opt<double>(w, "rotation", "align.motion_weights").value_or(1.0);
      a.motion.scale = get_opt<double>(w, "scale", "align.motion_weights").value_or(1.0);
    }
    cfg.align = a;
  }

  if (doc.contains("features")) cfg.features = parse_feature_specs(doc["features"].dump());

  if (doc.contains("linear")) {
    const auto& v = doc["linear"];
    check_keys(v, "linear", {"windows", "crosscorr_max_lag"});
    LinearOptions l;
    if (!v.contains("windows")) throw InputError("linear: windows are required");
    l.windows = window_from_json(v["windows"], "linear.windows");
    l.crosscorr_max_lag = get_size_opt(v, "crosscorr_max_lag", "linear");
    cfg.linear = l;
  }

  if (doc.contains("rqa")) {
    const auto& v = doc["rqa"];
    check_keys(v, "rqa", {"mode", "m", "tau", "theiler", "l_min", "radius", "radius_b", "rescale", "normalize",
                          "windows", "plots", "series", "pairs", "groups"});
    RqaStage st;
    auto& o = st.options;
    const auto mode = get_opt<std::string>(v, "mode", "rqa").value_or("auto");
    if (mode == "auto") o.mode = RecurrenceMode::kAuto;
    else if (mode == "cross") o.mode = RecurrenceMode::kCross;
    else if (mode == "joint") o.mode = RecurrenceMode::kJoint;
    else if (mode == "multi") o.mode = RecurrenceMode::kMulti;
    else throw InputError("rqa: mode must be auto, cross, joint or multi");
    o.m = get_size(v, "m", "rqa");
    o.tau = get_size(v, "tau", "rqa");
    o.theiler = get_size_opt(v, "theiler", "rqa").value_or(o.tau);
    o.l_min = get_size_opt(v, "l_min", "rqa").value_or(2);
    if (v.contains("radius")) o.radius = threshold_from_json(v["radius"], "rqa");
    if (v.contains("radius_b")) o.radius_b = threshold_from_json(v["radius_b"], "rqa");
    o.rescale = parse_rescale(get_opt<std::string>(v, "rescale", "rqa").value_or("mean"));
    o.normalize = parse_normalize_mode(get_opt<std::string>(v, "normalize", "rqa").value_or("zscore"));
    if (v.contains("windows")) o.windows = window_from_json(v["windows"], "rqa.windows");
    o.plots = get_opt<bool>(v, "plots", "rqa").value_or(false);
    st.series = get_opt<std::vector<std::string>>(v, "series", "rqa").value_or(std::vector<std::string>{});
    if (v.contains("pairs")) {
      for (const auto& p : v["pairs"]) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_string())
          throw InputError("rqa: pairs must be [series, series]");
        st.pairs.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
      }
    }
    if (v.contains("groups")) {
      for (const auto& g : v["groups"]) {
        check_keys(g, "rqa.groups", {"name", "series"});
        st.groups.emplace_back(get<std::string>(g, "name", "rqa.groups"),
                               get<std::vector<std::string>>(g, "series", "rqa.groups"));
      }
    }
    // Fail on impossible parameter combinations before anything runs.
    RqaOptions probe = o;
    probe.windows.reset();
    probe.resolve(1.0, 1);
    cfg.rqa = st;
  }

  if (doc.contains("pca")) {
    const auto& v = doc["pca"];
    check_keys(v, "pca", {"components", "standardize", "export_pm", "pm_components"});
    PcaOptions p;
    p.components = get_size_opt(v, "components", "pca").value_or(0);
    p.standardize = get_opt<bool>(v, "standardize", "pca").value_or(false);
    p.export_pm = get_opt<double>(v, "export_pm", "pca");
    p.pm_components = get_size_opt(v, "pm_components", "pca").value_or(0);
    cfg.pca = p;
  }

  if (doc.contains("simulate_gaps")) {
    const auto& v = doc["simulate_gaps"];
    const std::string where = "simulate_gaps";
    check_keys(v, where, {"trials", "gaps", "snr", "n_samples", "rate", "period", "m", "tau", "epsilon", "theiler",
                          "l_min"});
    GapSimConfig g;
    g.trials = get_size_opt(v, "trials", where).value_or(g.trials);
    if (v.contains("gaps")) g.gap_multiples = get<std::vector<double>>(v, "gaps", where);
    g.snr = get_opt<double>(v, "snr", where).value_or(g.snr);
    g.n_samples = get_size_opt(v, "n_samples", where).value_or(g.n_samples);
    g.rate = get_opt<double>(v, "rate", where).value_or(g.rate);
    g.period = get_opt<double>(v, "period", where).value_or(g.period);
    g.m = get_size_opt(v, "m", where).value_or(g.m);
    g.tau = get_size_opt(v, "tau", where).value_or(g.tau);
    g.epsilon = get_opt<double>(v, "epsilon", where).value_or(g.epsilon);
    g.theiler = get_size_opt(v, "theiler", where).value_or(g.tau);
    g.l_min = get_size_opt(v, "l_min", where).value_or(g.l_min);
    g.seed = cfg.seed;
    cfg.simulate_gaps = g;
  }

  const bool pose_stages = cfg.preprocess || cfg.align || !cfg.features.empty() || cfg.linear || cfg.rqa || cfg.pca;
  if (pose_stages && cfg.inputs.empty()) throw InputError("config: no inputs given");
  if (!pose_stages && !cfg.simulate_gaps) throw InputError("config: nothing to run");
  if ((cfg.linear || cfg.rqa) && cfg.features.empty()) throw InputError("config: linear and rqa stages need features");
  return cfg;
}

// ---- run ----

namespace {

class OutputTree {
 public:
  explicit OutputTree(fs::path root) : root_(std::move(root)) {}

  fs::path file(const std::string& rel, const std::string& stage) {
    entries_.push_back({rel, stage});
    return root_ / rel;
  }
  std::vector<ManifestEntry> entries() const {
    auto e = entries_;
    std::sort(e.begin(), e.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
    return e;
  }
  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  std::vector<ManifestEntry> entries_;
};

void prepare_output(const fs::path& out) {
  if (out.empty()) throw InputError("config: no output directory given");
  if (!fs::exists(out)) {
    fs::create_directories(out);
    return;
  }
  if (!fs::is_directory(out)) throw InputError("output path " + out.string() + " is not a directory");
  if (fs::is_empty(out)) return;
  const fs::path manifest = out / "manifest.json";
  if (!fs::exists(manifest))
    throw InputError("output directory " + out.string() + " is not empty and holds no previous run manifest");
  // Replace a previous run: remove exactly the files it listed.
  const json prev = parse_json_text(read_text_file(manifest), "previous manifest");
  for (const auto& f : prev.value("files", json::array())) {
    const fs::path p = out / f.value("path", std::string());
    if (fs::is_regular_file(p)) fs::remove(p);
  }
  for (const auto& d : {"preprocess", "align", "features", "linear", "rqa", "pca", "gapsim"}) {
    std::error_code ec;
    if (fs::is_directory(out / d) && fs::is_empty(out / d)) fs::remove(out / d, ec);
  }
  if (!fs::is_empty(out))
    throw InputError("output directory " + out.string() + " holds files not written by a previous run");
}

}  // namespace

RunReport run_pipeline(const RunConfig& cfg, std::size_t jobs) {
  if (cfg.jobs) jobs = *cfg.jobs;
  jobs = std::max<std::size_t>(jobs, 1);
  RunReport report;

  // Validation: load everything and resolve every reference before any output.
  std::vector<PoseSequence> poses;
  for (const auto& in : cfg.inputs) {
    if (!fs::exists(in.path)) throw InputError("input " + in.label + ": no such file " + in.path.string());
    try {
      poses.push_back(load_pose(in.path, in.load));
    } catch (const std::exception& e) {
      throw InputError("input " + in.label + ": " + e.what());
    }
  }
  auto for_inputs = [&](const std::function<void(const PoseSequence&)>& f) {
    for (std::size_t i = 0; i < poses.size(); ++i) {
      try {
        f(poses[i]);
      } catch (const InputError& e) {
        throw InputError("input " + cfg.inputs[i].label + ": " + e.what());
      }
    }
  };
  if (cfg.align) {
    for_inputs([&](const PoseSequence& p) {
      for (const auto& k : cfg.align->keypoints) k.resolve(p);
      for (const auto& [a, b] : cfg.align->symmetrize) {
        a.resolve(p);
        b.resolve(p);
      }
      if (cfg.align->center_on) cfg.align->center_on->resolve(p);
    });
  }
  for (const auto& f : cfg.features) {
    if (f.from_transforms()) {
      if (!cfg.align || cfg.align->scope != AlignScope::kFrame)
        throw InputError("feature '" + f.name + "' needs frame-scoped alignment");
      if (f.kind != "head_motion" && f.kind != "head_translation" && f.kind != "head_angle" && f.kind != "head_scale")
        throw InputError("unknown feature kind '" + f.kind + "'");
      continue;
    }
    for_inputs([&](const PoseSequence& p) { f.resolve(p); });
  }
  std::set<std::string> series_names;
  for (const auto& in : cfg.inputs)
    for (const auto& f : cfg.features) series_names.insert(in.label + "." + f.name);
  auto check_series = [&](const std::string& s) {
    if (!series_names.count(s)) throw InputError("rqa: unknown series '" + s + "' (expected <input>.<feature>)");
  };

  // Resolve which series sets the recurrence stage analyses.
  std::vector<std::pair<std::string, std::vector<std::string>>> rqa_jobs;
  if (cfg.rqa) {
    const auto& st = *cfg.rqa;
    switch (st.options.mode) {
      case RecurrenceMode::kAuto: {
        std::vector<std::string> names = st.series;
        if (names.empty()) names.assign(series_names.begin(), series_names.end());
        for (const auto& n : names) {
          check_series(n);
          rqa_jobs.push_back({n, {n}});
        }
        break;
      }
      case RecurrenceMode::kCross:
      case RecurrenceMode::kJoint: {
        auto pairs = st.pairs;
        if (pairs.empty()) {
          if (cfg.inputs.size() != 2)
            throw InputError("rqa: cross and joint modes need explicit pairs unless there are exactly two inputs");
          for (const auto& f : cfg.features)
            pairs.emplace_back(cfg.inputs[0].label + "." + f.name, cfg.inputs[1].label + "." + f.name);
        }
        for (const auto& [a, b] : pairs) {
          check_series(a);
          check_series(b);
          rqa_jobs.push_back({a + "__" + b, {a, b}});
        }
        break;
      }
      case RecurrenceMode::kMulti: {
        auto groups = st.groups;
        if (groups.empty())
          for (const auto& in : cfg.inputs) {
            std::vector<std::string> members;
            for (const auto& f : cfg.features) members.push_back(in.label + "." + f.name);
            groups.emplace_back(in.label, members);
          }
        for (const auto& [name, members] : groups) {
          if (members.empty()) throw InputError("rqa: group '" + name + "' is empty");
          for (const auto& m : members) check_series(m);
          rqa_jobs.push_back({name, members});
        }
        break;
      }
    }
  }

  prepare_output(cfg.output);
  OutputTree out(cfg.output);
  write_text_file(out.file("config.json", "config"), cfg.source_text);

  // Stage 1: masking, gap filling, filtering, resampling.
  if (cfg.preprocess) {
    in_stage("preprocess", [&] {
      for (std::size_t i = 0; i < poses.size(); ++i) {
        const auto& label = cfg.inputs[i].label;
        PreprocessResult r;
        try {
          r = preprocess_pose(poses[i], *cfg.preprocess);
        } catch (const std::exception& e) {
          throw StageError("preprocess", "input " + label + ": " + e.what());
        }
        write_pose_csv(r.pose, out.file("preprocess/" + label + ".csv", "preprocess"));
        write_metrics_csv(r.gaps, out.file("preprocess/" + label + "_gaps.csv", "preprocess"));
        poses[i] = std::move(r.pose);
      }
    });
  }

  // Stage 2: alignment.
  std::vector<std::optional<TransformFeatures>> motion(poses.size());
  if (cfg.align) {
    in_stage("align", [&] {
      auto r = align_poses(poses, *cfg.align, jobs);
      write_template_csv(r.tmpl, poses.front().labels(), out.file("align/template.csv", "align"));
      for (std::size_t i = 0; i < poses.size(); ++i) {
        const auto& label = cfg.inputs[i].label;
        write_pose_csv(r.aligned[i], out.file("align/" + label + ".csv", "align"));
        write_metrics_csv(r.transforms[i], out.file("align/" + label + "_transforms.csv", "align"));
        poses[i] = std::move(r.aligned[i]);
        motion[i] = std::move(r.motion[i]);
      }
    });
  }

  // Stage 3: features.
  NamedStore store;
  if (!cfg.features.empty()) {
    in_stage("features", [&] {
      for (std::size_t i = 0; i < poses.size(); ++i) {
        const auto& label = cfg.inputs[i].label;
        std::vector<std::string> names;
        std::vector<Series> cols;
        std::size_t longest = 0;
        for (const auto& f : cfg.features) {
          Series s;
          try {
            s = compute_feature(f, poses[i], motion[i]);
          } catch (const std::exception& e) {
            throw StageError("features", "input " + label + ", feature " + f.name + ": " + e.what());
          }
          longest = std::max(longest, s.size());
          names.push_back(f.name);
          cols.push_back(s);
          store.series[label + "." + f.name] = std::move(s);
        }
        // Shorter series (differences) are padded with masked samples.
        for (auto& c : cols) {
          auto v = std::vector<double>(c.values().begin(), c.values().end());
          auto m = std::vector<std::uint8_t>(c.mask().begin(), c.mask().end());
          v.resize(longest, 0.0);
          m.resize(longest, 0);
          c = Series(std::move(v), std::move(m), c.rate());
        }
        write_series_csv(names, cols, out.file("features/" + label + ".csv", "features"));
      }
    });
  }

  // Stage 4: linear kinematic summaries.
  if (cfg.linear) {
    in_stage("linear", [&] {
      for (const auto& [name, s] : store.series) {
        const auto spec = cfg.linear->windows.resolve(s.rate());
        try {
          write_metrics_csv(kinematic_table(kinematic_summary(s, spec)), out.file("linear/" + name + ".csv", "linear"));
        } catch (const std::exception& e) {
          throw StageError("linear", "series " + name + ": " + e.what());
        }
      }
      if (cfg.linear->crosscorr_max_lag && cfg.inputs.size() == 2) {
        for (const auto& f : cfg.features) {
          const std::string a = cfg.inputs[0].label + "." + f.name, b = cfg.inputs[1].label + "." + f.name;
          const auto& sa = store.at(a);
          try {
            auto t = crosscorr_table(sa, store.at(b), cfg.linear->windows.resolve(sa.rate()), *cfg.linear->crosscorr_max_lag);
            write_metrics_csv(t, out.file("linear/xcorr_" + a + "__" + b + ".csv", "linear"));
          } catch (const std::exception& e) {
            throw StageError("linear", "pair " + a + "/" + b + ": " + e.what());
          }
        }
      }
    });
  }

  // Stage 5: recurrence quantification.
  if (cfg.rqa) {
    in_stage("rqa", [&] {
      for (const auto& [name, members] : rqa_jobs) {
        std::vector<Series> set;
        for (const auto& m : members) set.push_back(store.at(m));
        std::vector<WindowRqa> res;
        try {
          res = run_rqa(set, cfg.rqa->options, jobs);
        } catch (const std::exception& e) {
          throw StageError("rqa", "series " + name + ": " + e.what());
        }
        for (const auto& w : res)
          if (w.short_window)
            report.warnings.push_back("rqa " + name + ": window at " + std::to_string(w.start) + " has only " +
                                      std::to_string(w.embedded_length) + " embedded points (< 1000)");
        write_metrics_csv(rqa_table(res), out.file("rqa/" + name + ".csv", "rqa"));
        if (cfg.rqa->options.plots)
          for (const auto& w : res)
            write_matrix_pgm(*w.matrix, out.file("rqa/" + name + "_w" + std::to_string(w.start) + ".pgm", "rqa"));
      }
    });
  }

  // Stage 6: principal component analysis of postures.
  if (cfg.pca) {
    in_stage("pca", [&] {
      const Eigen::MatrixXd frames = pose_matrix(poses);
      const auto model = fit_pca(frames, cfg.pca->standardize, poses.front().dims(), cfg.pca->components);
      for (const auto& w : model.warnings) report.warnings.push_back("pca: " + w);
      const double leak = translation_leakage(model, frames);
      if (leak > 0.95)
        report.warnings.push_back("pca: first component tracks global translation (|r| = " + std::to_string(leak) + ")");
      write_pca_csv(model, out.file("pca/model.csv", "pca"));
      Table summary;
      summary.columns = {"component", "variance", "ratio", "cumulative"};
      double cum = 0.0;
      for (Eigen::Index c = 0; c < model.explained_variance.size(); ++c) {
        cum += model.explained_ratio(c);
        summary.add_row({static_cast<std::int64_t>(c), model.explained_variance(c), model.explained_ratio(c), cum});
      }
      write_metrics_csv(summary, out.file("pca/summary.csv", "pca"));
      if (cfg.pca->export_pm) {
        const std::size_t k = cfg.pca->pm_components ? std::min(cfg.pca->pm_components, model.components())
                                                     : model.components();
        const auto& labels = poses.front().labels();
        const std::size_t dims = poses.front().dims();
        for (const auto& pm : principal_movements(model, k, *cfg.pca->export_pm)) {
          Table t;
          t.columns = {"keypoint"};
          for (const char* side : {"min", "max"})
            for (std::size_t d = 0; d < dims; ++d) t.columns.push_back(std::string(side) + "_" + "xyz"[d]);
          for (Eigen::Index r = 0; r < pm.min_pose.rows(); ++r) {
            std::vector<Cell> row{labels[static_cast<std::size_t>(r)]};
            for (Eigen::Index d = 0; d < pm.min_pose.cols(); ++d) row.push_back(pm.min_pose(r, d));
            for (Eigen::Index d = 0; d < pm.max_pose.cols(); ++d) row.push_back(pm.max_pose(r, d));
            t.add_row(std::move(row));
          }
          write_metrics_csv(t, out.file("pca/pm_" + std::to_string(pm.component) + ".csv", "pca"));
        }
      }
    });
  }

  // Stage 7: gap simulation.
  if (cfg.simulate_gaps) {
    in_stage("simulate_gaps", [&] {
      GapSimConfig g = *cfg.simulate_gaps;
      g.jobs = jobs;
      const auto r = run_gap_simulation(g);
      write_metrics_csv(gapsim_summary_table(r), out.file("gapsim/summary.csv", "simulate_gaps"));
      write_metrics_csv(gapsim_trials_table(r), out.file("gapsim/trials.csv", "simulate_gaps"));
      write_matrix_pgm(r.baseline_matrix, out.file("gapsim/baseline.pgm", "simulate_gaps"));
      for (const auto& gl : r.gaps)
        write_difference_pgm(gl.difference, out.file("gapsim/diff_" + gap_tag(gl.multiple) + ".pgm", "simulate_gaps"));
    });
  }

  out.file("manifest.json", "manifest");
  report.manifest = out.entries();
  json m;
  m["files"] = json::array();
  for (const auto& e : report.manifest) m["files"].push_back({{"path", e.path}, {"stage", e.stage}});
  write_text_file(out.root() / "manifest.json", m.dump(2) + "\n");
  return report;
}

}  // namespace posedyn
