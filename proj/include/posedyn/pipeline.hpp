#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "posedyn/align.hpp"
#include "posedyn/core.hpp"
#include "posedyn/error.hpp"
#include "posedyn/gapsim.hpp"
#include "posedyn/io.hpp"
#include "posedyn/kinematics.hpp"
#include "posedyn/preprocess.hpp"
#include "posedyn/recurrence.hpp"

namespace posedyn {

/// Failure inside a pipeline stage; what() starts with the stage name.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& what) : Error(stage + ": " + what), stage_(stage) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// Keypoints are referenced by label or by index.
struct KeypointRef {
  std::string label;
  std::optional<std::size_t> index;

  std::size_t resolve(const PoseSequence& p) const;
  std::string text() const { return index ? std::to_string(*index) : label; }
};
KeypointRef parse_keypoint_ref(const std::string& text);

// Window given in samples or in seconds (converted with the series rate).
struct WindowRequest {
  std::size_t length = 0;
  double seconds = 0.0;
  double overlap = 0.0;

  WindowSpec resolve(double rate) const;
};
WindowRequest parse_window_request(const std::string& text);

struct PreprocessOptions {
  std::optional<double> confidence_min;
  std::optional<std::size_t> max_gap;
  std::optional<FilterSpec> filter;
  std::optional<double> resample_rate;
  ResampleMethod resample_method = ResampleMethod::kCubic;
  NormalizeMode normalize = NormalizeMode::kNone;
};

struct PreprocessResult {
  PoseSequence pose;
  Table gaps;  // keypoint, axis, start, length, filled, edge
};

/// Confidence masking, gap interpolation, low-pass filtering, resampling and
/// per-axis normalization, in that order.
PreprocessResult preprocess_pose(const PoseSequence& p, const PreprocessOptions& opt);

enum class AlignScope { kFrame, kWindow };

struct AlignOptions {
  std::vector<KeypointRef> keypoints;  // empty: every keypoint
  AlignScope scope = AlignScope::kFrame;
  bool allow_scale = false;
  bool center_frames = false;
  std::optional<KeypointRef> center_on;
  std::optional<WindowRequest> windows;
  std::vector<std::pair<KeypointRef, KeypointRef>> symmetrize;
  std::optional<std::filesystem::path> template_file;
  MotionWeights motion;
};

struct AlignResult {
  Template tmpl;
  std::vector<PoseSequence> aligned;
  std::vector<Table> transforms;
  std::vector<std::optional<TransformFeatures>> motion;  // frame scope only
};

/// Frame scope aligns every frame. Window scope aligns the mean pose of each
/// window; every frame takes the window whose centre is nearest, and frames
/// after the last full window are dropped.
AlignResult align_poses(const std::vector<PoseSequence>& poses, const AlignOptions& opt, std::size_t jobs);

struct FeatureSpec {
  std::string name;
  std::string kind;  // FeatureKind names, or head_motion / head_translation / head_angle / head_scale
  std::vector<KeypointRef> keypoints;
  std::vector<std::pair<KeypointRef, KeypointRef>> pairs;
  std::vector<KeypointRef> set_a, set_b;
  std::optional<std::size_t> axis;

  bool from_transforms() const;
  FeatureDef resolve(const PoseSequence& p) const;
};

/// Feature definitions from a JSON array (or {"features": [...]}).
std::vector<FeatureSpec> parse_feature_specs(const std::string& json_text);

Series compute_feature(const FeatureSpec& spec, const PoseSequence& p, const std::optional<TransformFeatures>& motion);

/// window_start, flagged, then mean/sd/max/rms of displacement, velocity and
/// acceleration.
Table kinematic_table(const std::vector<KinematicSummary>& rows);

/// Per-window cross-correlation: window_start, lag0, peak_lag, peak_r.
Table crosscorr_table(const Series& a, const Series& b, const WindowSpec& windows, std::size_t max_lag);

struct RqaOptions {
  RecurrenceMode mode = RecurrenceMode::kAuto;
  std::size_t m = 1;
  std::size_t tau = 1;
  std::size_t theiler = 0;
  std::size_t l_min = 2;
  Threshold radius = Threshold::fixed(0.2);
  std::optional<Threshold> radius_b;
  Rescale rescale = Rescale::kMean;
  NormalizeMode normalize = NormalizeMode::kZScore;
  std::optional<WindowRequest> windows;  // absent: whole recording
  bool plots = false;

  WindowedRqaOptions resolve(double rate, std::size_t jobs) const;
};

/// Windowed (or whole-recording) analysis of one series set.
std::vector<WindowRqa> run_rqa(const std::vector<Series>& series, const RqaOptions& opt, std::size_t jobs);

/// window_start, embedded_length, short_window, d_bar, epsilon, then the
/// RqaMetrics columns.
Table rqa_table(const std::vector<WindowRqa>& windows);

/// gap_multiple, gap_length, rr/det error mean and SD.
Table gapsim_summary_table(const GapSimResult& r);
/// One row per (gap, trial).
Table gapsim_trials_table(const GapSimResult& r);

struct InputSpec {
  std::filesystem::path path;
  PoseLoadOptions load;
  std::string label;
};

struct LinearOptions {
  WindowRequest windows;
  std::optional<std::size_t> crosscorr_max_lag;
};

struct PcaOptions {
  std::size_t components = 0;
  bool standardize = false;
  std::optional<double> export_pm;
  std::size_t pm_components = 0;  // 0: all retained
};

struct RqaStage {
  RqaOptions options;
  std::vector<std::string> series;                                 // auto
  std::vector<std::pair<std::string, std::string>> pairs;          // cross, joint
  std::vector<std::pair<std::string, std::vector<std::string>>> groups;  // multi
};

struct RunConfig {
  std::string source_text;  // echoed verbatim
  std::vector<InputSpec> inputs;
  std::filesystem::path output;
  std::uint64_t seed = 1;
  std::optional<std::size_t> jobs;
  std::optional<PreprocessOptions> preprocess;
  std::optional<AlignOptions> align;
  std::vector<FeatureSpec> features;
  std::optional<LinearOptions> linear;
  std::optional<RqaStage> rqa;
  std::optional<PcaOptions> pca;
  std::optional<GapSimConfig> simulate_gaps;
};

/// Parses and checks everything that can be checked without data. Relative
/// input paths resolve against base_dir.
RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir = {});

struct ManifestEntry {
  std::string path;  // relative to the output directory
  std::string stage;
};

struct RunReport {
  std::vector<ManifestEntry> manifest;
  std::vector<std::string> warnings;
};

/// Loads inputs, resolves every keypoint and series reference, then runs
/// preprocess -> align -> features -> linear -> rqa -> pca -> simulate_gaps,
/// persisting each stage under the output directory. Reference errors throw
/// InputError before any stage runs; stage failures throw StageError.
RunReport run_pipeline(const RunConfig& cfg, std::size_t jobs = 1);

}  // namespace posedyn
