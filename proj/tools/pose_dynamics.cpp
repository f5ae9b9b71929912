#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "posedyn/embedding.hpp"
#include "posedyn/error.hpp"
#include "posedyn/io.hpp"
#include "posedyn/pca.hpp"
#include "posedyn/pipeline.hpp"

namespace fs = std::filesystem;
using namespace posedyn;

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<std::pair<KeypointRef, KeypointRef>> parse_pairs(const std::string& text) {
  std::vector<std::pair<KeypointRef, KeypointRef>> out;
  for (const auto& p : split(text, ',')) {
    const auto ab = split(p, ':');
    if (ab.size() != 2) throw InputError("pairs are written a:b,c:d (got '" + p + "')");
    out.emplace_back(parse_keypoint_ref(ab[0]), parse_keypoint_ref(ab[1]));
  }
  return out;
}

struct PoseInput {
  std::vector<std::string> paths;
  std::string format = "csv";
  double rate = 0.0;
  std::size_t person = 0;
  std::string field = "pose_keypoints_2d";

  void add_to(CLI::App* app, bool many) {
    if (many) app->add_option("--input", paths, "Pose file(s)")->required();
    else app->add_option("--input", paths, "Pose file")->required()->expected(1);
    app->add_option("--format", format, "csv or pose-json")->capture_default_str();
    app->add_option("--rate", rate, "Sampling rate in Hz")->required();
    app->add_option("--person", person, "Person index in pose JSON")->capture_default_str();
    app->add_option("--keypoint-field", field, "Keypoint array field in pose JSON")->capture_default_str();
  }
  std::vector<PoseSequence> load() const {
    PoseLoadOptions opt;
    opt.format = parse_pose_format(format);
    opt.rate = rate;
    opt.person = person;
    opt.keypoint_field = field;
    std::vector<PoseSequence> out;
    for (const auto& p : paths) out.push_back(load_pose(p, opt));
    return out;
  }
};

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pose time-series preprocessing, alignment, kinematics and recurrence analysis"};
  app.require_subcommand(1);
  std::size_t jobs = 1;
  app.add_option("--jobs", jobs, "Worker threads")->capture_default_str();

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Mask, gap-fill, filter, resample and normalize a pose file");
  PoseInput pre_in;
  pre_in.add_to(pre, false);
  std::optional<double> conf_min, filter_cutoff, resample_rate;
  std::optional<std::size_t> max_gap;
  int filter_order = 4;
  std::string resample_method = "cubic", pre_normalize = "none", pre_scope = "trial", pre_out;
  pre->add_option("--confidence-min", conf_min, "Mask keypoints below this confidence");
  pre->add_option("--max-gap", max_gap, "Longest interior gap to interpolate (samples)");
  pre->add_option("--filter-cutoff", filter_cutoff, "Low-pass cutoff in Hz");
  pre->add_option("--filter-order", filter_order, "Butterworth order (even)")->capture_default_str();
  pre->add_option("--resample", resample_rate, "Target rate in Hz");
  pre->add_option("--resample-method", resample_method, "cubic or decimate")->capture_default_str();
  pre->add_option("--normalize", pre_normalize, "none, zscore or unit")->capture_default_str();
  pre->add_option("--scope", pre_scope, "Normalization scope (trial)")->capture_default_str();
  pre->add_option("--out", pre_out, "Output pose CSV")->required();

  // align
  auto* al = app.add_subcommand("align", "Procrustes alignment onto a template");
  PoseInput al_in;
  al_in.add_to(al, true);
  std::string al_template = "global", al_keypoints, al_scope = "frame", al_windows, al_sym, al_center, al_out;
  bool al_scale = false, al_center_frames = false;
  al->add_option("--template", al_template, "global or a template CSV")->capture_default_str();
  al->add_option("--keypoints", al_keypoints, "Comma-separated landmark labels or indices (default all)");
  al->add_option("--scope", al_scope, "frame or window")->capture_default_str();
  al->add_option("--windows", al_windows, "Window-scope windows L,overlap");
  al->add_flag("--allow-scale", al_scale, "Fit a scale factor");
  al->add_option("--symmetrize", al_sym, "Mirror pairs a:b,c:d");
  al->add_option("--center-on", al_center, "Keypoint centring each window");
  al->add_flag("--center-frames", al_center_frames, "Centre frames before averaging the template");
  al->add_option("--out", al_out, "Output directory")->required();

  // features
  auto* fe = app.add_subcommand("features", "Extract kinematic features");
  PoseInput fe_in;
  fe_in.add_to(fe, false);
  std::string fe_def, fe_windows, fe_out;
  fe->add_option("--def", fe_def, "Feature definition JSON file")->required();
  fe->add_option("--windows", fe_windows, "Summary windows L,overlap");
  fe->add_option("--out", fe_out, "Output directory")->required();

  // embed-params
  auto* ep = app.add_subcommand("embed-params", "AMI delay and FNN dimension per series");
  std::string ep_input, ep_columns, ep_out;
  double ep_rate = 1.0;
  EmbeddingSearch search;
  ep->add_option("--input", ep_input, "Series CSV")->required();
  ep->add_option("--rate", ep_rate, "Sampling rate in Hz")->capture_default_str();
  ep->add_option("--columns", ep_columns, "Comma-separated columns (default all)");
  ep->add_option("--max-lag", search.max_lag, "Largest AMI lag")->capture_default_str();
  ep->add_option("--max-m", search.max_m, "Largest FNN dimension")->capture_default_str();
  ep->add_option("--bins", search.bins, "AMI histogram bins")->capture_default_str();
  ep->add_option("--rtol", search.fnn.r_tol, "FNN distance-ratio tolerance")->capture_default_str();
  ep->add_option("--atol", search.fnn.a_tol, "FNN attractor-size tolerance")->capture_default_str();
  ep->add_option("--out", ep_out, "Output directory")->required();

  // rqa / crqa / mdrqa
  struct RqaCli {
    std::vector<std::string> inputs;
    std::string columns, radius = "fixed:0.2", radius_b, rescale = "mean", normalize = "zscore", windows, plots, out;
    double rate = 1.0;
    std::size_t m = 1, tau = 1, l_min = 2;
    std::optional<std::size_t> theiler;
    bool joint = false;
  };
  RqaCli rq;
  auto add_rqa = [&](const std::string& name, const std::string& desc) {
    auto* c = app.add_subcommand(name, desc);
    c->add_option("--input", rq.inputs, "Series CSV file(s)")->required();
    c->add_option("--rate", rq.rate, "Sampling rate in Hz")->capture_default_str();
    c->add_option("--columns", rq.columns, "Comma-separated column names");
    c->add_option("--m", rq.m, "Embedding dimension")->required();
    c->add_option("--tau", rq.tau, "Delay in samples")->required();
    c->add_option("--theiler", rq.theiler, "Theiler window (default tau)");
    c->add_option("--lmin", rq.l_min, "Minimum line length")->capture_default_str();
    c->add_option("--radius", rq.radius, "fixed:V or rr:P")->capture_default_str();
    c->add_option("--rescale", rq.rescale, "mean, max or none")->capture_default_str();
    c->add_option("--normalize", rq.normalize, "zscore, unit or none (per window)")->capture_default_str();
    c->add_option("--windows", rq.windows, "Windows L,overlap (default whole recording)");
    c->add_option("--plots", rq.plots, "Directory for PGM recurrence plots");
    c->add_option("--out", rq.out, "Metrics CSV")->required();
    return c;
  };
  auto* rqa_cmd = add_rqa("rqa", "Auto-recurrence quantification");
  auto* crqa_cmd = add_rqa("crqa", "Cross- or joint-recurrence quantification of two series");
  crqa_cmd->add_flag("--joint", rq.joint, "Joint instead of cross recurrence");
  crqa_cmd->add_option("--radius-b", rq.radius_b, "Second series threshold in joint mode");
  auto* mdrqa_cmd = add_rqa("mdrqa", "Multidimensional recurrence quantification");

  // pca
  auto* pc = app.add_subcommand("pca", "Principal component analysis of postures");
  PoseInput pc_in;
  pc_in.add_to(pc, true);
  std::size_t pc_components = 0;
  bool pc_standardize = false;
  std::optional<double> pc_pm;
  std::string pc_out;
  pc->add_option("--components", pc_components, "Components to keep (0 = all)")->capture_default_str();
  pc->add_flag("--standardize", pc_standardize, "Scale columns to unit variance");
  pc->add_option("--export-pm", pc_pm, "Export principal movements at this RMS displacement");
  pc->add_option("--out", pc_out, "Output directory")->required();

  // simulate-gaps
  auto* sg = app.add_subcommand("simulate-gaps", "Gap-interpolation error simulation on a noisy sine");
  GapSimConfig gs;
  std::string sg_gaps, sg_out;
  std::optional<std::size_t> sg_theiler;
  sg->add_option("--seed", gs.seed, "Random seed")->capture_default_str();
  sg->add_option("--trials", gs.trials, "Trials per gap length")->capture_default_str();
  sg->add_option("--gaps", sg_gaps, "Gap lengths in units of tau, e.g. 0.5,1,2,4");
  sg->add_option("--snr", gs.snr, "Sine to noise RMS ratio")->capture_default_str();
  sg->add_option("--n-samples", gs.n_samples, "Signal length")->capture_default_str();
  sg->add_option("--m", gs.m, "Embedding dimension")->capture_default_str();
  sg->add_option("--tau", gs.tau, "Delay in samples")->capture_default_str();
  sg->add_option("--epsilon", gs.epsilon, "Mean-rescaled radius")->capture_default_str();
  sg->add_option("--theiler", sg_theiler, "Theiler window (default tau)");
  sg->add_option("--lmin", gs.l_min, "Minimum line length")->capture_default_str();
  sg->add_option("--out", sg_out, "Output directory")->required();

  // run
  auto* run = app.add_subcommand("run", "Run a full pipeline from a JSON configuration");
  std::string run_config, run_out;
  run->add_option("--config", run_config, "Run configuration JSON")->required();
  run->add_option("--out", run_out, "Output directory (overrides the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (pre->parsed()) {
      PreprocessOptions opt;
      opt.confidence_min = conf_min;
      opt.max_gap = max_gap;
      if (filter_cutoff) opt.filter = FilterSpec{filter_order, *filter_cutoff};
      opt.resample_rate = resample_rate;
      opt.resample_method = parse_resample_method(resample_method);
      opt.normalize = parse_normalize_mode(pre_normalize);
      if (pre_scope != "trial")
        throw InputError("preprocess normalizes whole recordings; window-scoped normalization belongs to rqa --normalize");
      const auto r = preprocess_pose(pre_in.load().front(), opt);
      write_pose_csv(r.pose, pre_out);
      fs::path gaps = pre_out;
      gaps.replace_filename(gaps.stem().string() + "_gaps.csv");
      write_metrics_csv(r.gaps, gaps);
    } else if (al->parsed()) {
      AlignOptions opt;
      for (const auto& k : split(al_keypoints, ',')) opt.keypoints.push_back(parse_keypoint_ref(k));
      if (al_scope == "window") opt.scope = AlignScope::kWindow;
      else if (al_scope != "frame") throw InputError("--scope must be frame or window");
      if (!al_windows.empty()) opt.windows = parse_window_request(al_windows);
      if (opt.scope == AlignScope::kWindow && !opt.windows) throw InputError("window scope needs --windows");
      opt.allow_scale = al_scale;
      opt.center_frames = al_center_frames;
      if (!al_center.empty()) opt.center_on = parse_keypoint_ref(al_center);
      opt.symmetrize = parse_pairs(al_sym);
      if (al_template != "global") opt.template_file = al_template;
      const auto poses = al_in.load();
      const auto r = align_poses(poses, opt, jobs);
      const fs::path out = al_out;
      write_template_csv(r.tmpl, poses.front().labels(), out / "template.csv");
      for (std::size_t i = 0; i < poses.size(); ++i) {
        const std::string stem = fs::path(al_in.paths[i]).stem().string();
        write_pose_csv(r.aligned[i], out / (stem + ".csv"));
        write_metrics_csv(r.transforms[i], out / (stem + "_transforms.csv"));
      }
    } else if (fe->parsed()) {
      const auto specs = parse_feature_specs(read_text_file(fe_def));
      const auto pose = fe_in.load().front();
      std::vector<std::string> names;
      std::vector<Series> cols;
      const fs::path out = fe_out;
      std::size_t longest = 0;
      for (const auto& f : specs) {
        cols.push_back(compute_feature(f, pose, std::nullopt));
        names.push_back(f.name);
        longest = std::max(longest, cols.back().size());
        if (!fe_windows.empty()) {
          const auto spec = parse_window_request(fe_windows).resolve(pose.rate());
          write_metrics_csv(kinematic_table(kinematic_summary(cols.back(), spec)), out / (f.name + "_summary.csv"));
        }
      }
      for (auto& c : cols) {
        std::vector<double> v(c.values().begin(), c.values().end());
        std::vector<std::uint8_t> m(c.mask().begin(), c.mask().end());
        v.resize(longest, 0.0);
        m.resize(longest, 0);
        c = Series(std::move(v), std::move(m), c.rate());
      }
      write_series_csv(names, cols, out / "features.csv");
    } else if (ep->parsed()) {
      auto data = read_series_csv(ep_input, ep_rate);
      std::vector<std::string> names;
      std::vector<Series> series;
      const auto wanted = split(ep_columns, ',');
      for (std::size_t i = 0; i < data.names.size(); ++i)
        if (wanted.empty() || std::find(wanted.begin(), wanted.end(), data.names[i]) != wanted.end()) {
          names.push_back(data.names[i]);
          series.push_back(data.series[i]);
        }
      if (series.empty()) throw InputError("no matching columns in " + ep_input);
      search.jobs = jobs;
      const auto est = estimate_sample_parameters(series, search);
      const fs::path out = ep_out;
      Table ami_t, fnn_t, params;
      ami_t.columns = {"lag"};
      fnn_t.columns = {"m"};
      for (const auto& n : names) {
        ami_t.columns.push_back(n);
        fnn_t.columns.push_back(n);
      }
      for (std::size_t lag = 0; lag <= search.max_lag; ++lag) {
        std::vector<Cell> row{static_cast<std::int64_t>(lag)};
        for (const auto& s : est.per_series) row.push_back(s.ami.mi[lag]);
        ami_t.add_row(std::move(row));
      }
      for (std::size_t d = 1; d <= search.max_m; ++d) {
        std::vector<Cell> row{static_cast<std::int64_t>(d)};
        for (const auto& s : est.per_series) row.push_back(s.fnn.fraction[d - 1]);
        fnn_t.add_row(std::move(row));
      }
      params.columns = {"series", "tau", "m", "ami_first_minimum", "ami_plateau_onset"};
      auto opt_int = [](const std::optional<std::size_t>& v) { return v ? Cell(static_cast<std::int64_t>(*v)) : Cell(); };
      for (std::size_t i = 0; i < names.size(); ++i) {
        const auto& s = est.per_series[i];
        params.add_row({names[i], opt_int(s.tau), opt_int(s.fnn.selected_m), opt_int(s.ami.first_minimum),
                        opt_int(s.ami.plateau_onset)});
      }
      write_metrics_csv(ami_t, out / "ami.csv");
      write_metrics_csv(fnn_t, out / "fnn.csv");
      write_metrics_csv(params, out / "params.csv");
      std::cout << "tau=" << est.spec.tau << " m=" << est.spec.m << '\n';
    } else if (rqa_cmd->parsed() || crqa_cmd->parsed() || mdrqa_cmd->parsed()) {
      RqaOptions opt;
      opt.mode = rqa_cmd->parsed() ? RecurrenceMode::kAuto
                 : mdrqa_cmd->parsed() ? RecurrenceMode::kMulti
                 : rq.joint ? RecurrenceMode::kJoint
                            : RecurrenceMode::kCross;
      opt.m = rq.m;
      opt.tau = rq.tau;
      opt.theiler = rq.theiler.value_or(rq.tau);
      opt.l_min = rq.l_min;
      opt.radius = Threshold::parse(rq.radius);
      if (!rq.radius_b.empty()) opt.radius_b = Threshold::parse(rq.radius_b);
      opt.rescale = parse_rescale(rq.rescale);
      opt.normalize = parse_normalize_mode(rq.normalize);
      if (!rq.windows.empty()) opt.windows = parse_window_request(rq.windows);
      opt.plots = !rq.plots.empty();

      std::vector<std::string> names;
      std::vector<Series> pool;
      for (const auto& in : rq.inputs) {
        auto d = read_series_csv(in, rq.rate);
        names.insert(names.end(), d.names.begin(), d.names.end());
        pool.insert(pool.end(), d.series.begin(), d.series.end());
      }
      std::vector<Series> set;
      const auto wanted = split(rq.columns, ',');
      if (wanted.empty()) {
        const std::size_t need = opt.mode == RecurrenceMode::kAuto ? 1 : (opt.mode == RecurrenceMode::kMulti ? pool.size() : 2);
        if (pool.size() < need) throw InputError("not enough series columns in the input");
        set.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(need));
      } else {
        for (const auto& w : wanted) {
          auto it = std::find(names.begin(), names.end(), w);
          if (it == names.end()) throw InputError("unknown column '" + w + "'");
          set.push_back(pool[static_cast<std::size_t>(it - names.begin())]);
        }
      }
      const auto res = run_rqa(set, opt, jobs);
      std::vector<std::string> warnings;
      for (const auto& w : res)
        if (w.short_window)
          warnings.push_back("window at " + std::to_string(w.start) + " has only " + std::to_string(w.embedded_length) +
                             " embedded points (< 1000)");
      print_warnings(warnings);
      write_metrics_csv(rqa_table(res), rq.out);
      if (opt.plots)
        for (const auto& w : res) write_matrix_pgm(*w.matrix, fs::path(rq.plots) / ("w" + std::to_string(w.start) + ".pgm"));
    } else if (pc->parsed()) {
      const auto poses = pc_in.load();
      const Eigen::MatrixXd frames = pose_matrix(poses);
      const auto model = fit_pca(frames, pc_standardize, poses.front().dims(), pc_components);
      print_warnings(model.warnings);
      const fs::path out = pc_out;
      write_pca_csv(model, out / "model.csv");
      if (pc_pm) {
        const auto& labels = poses.front().labels();
        for (const auto& pm : principal_movements(model, model.components(), *pc_pm)) {
          Table t;
          t.columns = {"keypoint"};
          for (const char* side : {"min", "max"})
            for (std::size_t d = 0; d < poses.front().dims(); ++d) t.columns.push_back(std::string(side) + "_" + "xyz"[d]);
          for (Eigen::Index r = 0; r < pm.min_pose.rows(); ++r) {
            std::vector<Cell> row{labels[static_cast<std::size_t>(r)]};
            for (Eigen::Index d = 0; d < pm.min_pose.cols(); ++d) row.push_back(pm.min_pose(r, d));
            for (Eigen::Index d = 0; d < pm.max_pose.cols(); ++d) row.push_back(pm.max_pose(r, d));
            t.add_row(std::move(row));
          }
          write_metrics_csv(t, out / ("pm_" + std::to_string(pm.component) + ".csv"));
        }
      }
      std::printf("%zu components, %.4f of variance\n", model.components(), model.explained_ratio.sum());
    } else if (sg->parsed()) {
      if (!sg_gaps.empty()) {
        gs.gap_multiples.clear();
        for (const auto& g : split(sg_gaps, ',')) {
          try {
            gs.gap_multiples.push_back(std::stod(g));
          } catch (const std::exception&) {
            throw InputError("invalid gap multiple '" + g + "'");
          }
        }
      }
      gs.theiler = sg_theiler.value_or(gs.tau);
      gs.jobs = jobs;
      const auto r = run_gap_simulation(gs);
      const fs::path out = sg_out;
      write_metrics_csv(gapsim_summary_table(r), out / "errors.csv");
      write_metrics_csv(gapsim_trials_table(r), out / "trials.csv");
      write_matrix_pgm(r.baseline_matrix, out / "baseline.pgm");
      for (const auto& g : r.gaps) {
        char name[48];
        std::snprintf(name, sizeof name, "diff_%gtau.pgm", g.multiple);
        write_difference_pgm(g.difference, out / name);
      }
      for (const auto& g : r.gaps)
        std::printf("gap %.2g tau: rr error %.2f%% det error %.2f%%\n", g.multiple, g.rr_error_mean, g.det_error_mean);
    } else if (run->parsed()) {
      const fs::path cfg_path = run_config;
      if (!fs::is_regular_file(cfg_path)) throw InputError("no such config file: " + run_config);
      auto cfg = parse_run_config(read_text_file(cfg_path), cfg_path.parent_path());
      if (!run_out.empty()) cfg.output = run_out;
      const auto report = run_pipeline(cfg, jobs);
      print_warnings(report.warnings);
      std::printf("%zu files written to %s\n", report.manifest.size(), cfg.output.string().c_str());
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
