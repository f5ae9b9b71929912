#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "posedyn/core.hpp"
#include "posedyn/embedding.hpp"
#include "posedyn/preprocess.hpp"

namespace posedyn {

enum class RecurrenceMode { kAuto, kCross, kJoint, kMulti };
enum class Rescale { kMean, kMax, kNone };
enum class ThresholdKind { kFixed, kTargetRate };

struct Threshold {
  ThresholdKind kind = ThresholdKind::kFixed;
  double value = 0.2;  // epsilon (rescaled units) or target recurrence rate in (0, 1)

  static Threshold fixed(double eps) { return {ThresholdKind::kFixed, eps}; }
  static Threshold target_rate(double rate) { return {ThresholdKind::kTargetRate, rate}; }
  /// "fixed:0.2" or "rr:0.025".
  static Threshold parse(const std::string& text);
};

struct RecurrenceConfig {
  RecurrenceMode mode = RecurrenceMode::kAuto;
  Threshold threshold;
  Rescale rescale = Rescale::kMean;
  std::size_t theiler = 0;  // self-recurrence modes only
  std::size_t l_min = 2;

  void validate() const;
};

/// Binary recurrence matrix stored as packed 64-bit words, one padded row per
/// time index. Self-recurrence matrices (auto, multi, joint) exclude the band
/// |i - j| <= theiler, which always contains the main diagonal.
class RecurrenceMatrix {
 public:
  RecurrenceMatrix() = default;
  RecurrenceMatrix(std::size_t rows, std::size_t cols, RecurrenceMode mode, std::size_t theiler);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  RecurrenceMode mode() const { return mode_; }
  bool self_recurrence() const { return mode_ != RecurrenceMode::kCross; }
  std::size_t theiler() const { return theiler_; }

  bool test(std::size_t i, std::size_t j) const { return (bits_[i * words_ + (j >> 6)] >> (j & 63)) & 1u; }
  void set(std::size_t i, std::size_t j) { bits_[i * words_ + (j >> 6)] |= std::uint64_t{1} << (j & 63); }
  const std::uint64_t* row_words(std::size_t i) const { return bits_.data() + i * words_; }
  std::size_t words_per_row() const { return words_; }

  bool eligible(std::size_t i, std::size_t j) const;
  std::size_t eligible_cells() const;
  std::size_t recurrent_points() const;

  double d_bar = 0.0;           // mean eligible pairwise distance
  double distance_scale = 1.0;  // divisor applied before thresholding (d_bar, max, or 1)
  double epsilon_used = 0.0;  // threshold in rescaled units
  double rr = 0.0;            // achieved recurrence rate, percent of eligible cells
  std::vector<double> parent_epsilons;  // joint mode: thresholds of both parents

  bool same_bits(const RecurrenceMatrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && bits_ == other.bits_;
  }
  void refresh_rate();

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t words_ = 0;
  RecurrenceMode mode_ = RecurrenceMode::kAuto;
  std::size_t theiler_ = 0;
  std::vector<std::uint64_t> bits_;
};

/// Self-recurrence of one trajectory (auto or multi mode).
RecurrenceMatrix build_matrix(const PointCloud& a, const RecurrenceConfig& cfg);
/// Cross-recurrence CR(i, j) = [|a_i - b_j| <= eps].
RecurrenceMatrix build_cross_matrix(const PointCloud& a, const PointCloud& b, const RecurrenceConfig& cfg);
/// Elementwise AND of two self-recurrence matrices of equal shape.
RecurrenceMatrix joint_matrix(const RecurrenceMatrix& ra, const RecurrenceMatrix& rb);

/// Stacks per-series delay embeddings at aligned time indices into points of
/// dimension N*m. Series are used as given; callers z-score beforehand.
PointCloud multi_embed(const std::vector<Series>& series, std::size_t m, std::size_t tau);

/// counts[l] = number of maximal lines of length l (index 0 unused).
struct LineHistogram {
  std::vector<std::size_t> counts;

  std::size_t lines(std::size_t min_length = 1) const;
  std::size_t points(std::size_t min_length = 1) const;
  bool operator==(const LineHistogram&) const = default;
};

LineHistogram diagonal_histogram(const RecurrenceMatrix& r);
LineHistogram vertical_histogram(const RecurrenceMatrix& r);

struct RqaMetrics {
  double rr = 0.0;   // percent
  double det = 0.0;  // percent
  double lam = 0.0;  // percent
  std::optional<double> l_mean;
  std::optional<double> l_max;
  std::optional<double> l_sd;  // sample SD of diagonal lengths >= l_min
  std::optional<double> entr;  // nats
  std::optional<double> tt;
  std::optional<double> div;

  static const std::vector<std::string>& column_names();
  std::vector<std::optional<double>> values() const;
};

RqaMetrics compute_metrics(const RecurrenceMatrix& r, const LineHistogram& diagonal, const LineHistogram& vertical,
                           std::size_t l_min);
RqaMetrics compute_metrics(const RecurrenceMatrix& r, std::size_t l_min);

struct WindowedRqaOptions {
  WindowSpec windows;
  EmbeddingSpec embedding;  // m, tau; theiler and l_min come from the configs
  RecurrenceConfig config;
  RecurrenceConfig config_b;  // second threshold for joint mode
  NormalizeMode normalize = NormalizeMode::kNone;  // applied inside every window
  std::size_t jobs = 1;
  bool keep_matrices = false;
};

struct WindowRqa {
  std::size_t start = 0;
  RqaMetrics metrics;
  double d_bar = 0.0;
  double epsilon_used = 0.0;
  std::size_t embedded_length = 0;
  bool short_window = false;  // fewer than 1000 embedded points
  std::optional<RecurrenceMatrix> matrix;
};

/// Windowed analyses. config.mode selects how `series` is read: auto
/// (1 series), cross and joint (2 series), multi (N series). Every window is
/// sliced, normalized, embedded, thresholded and measured independently.
std::vector<WindowRqa> windowed_rqa(const std::vector<Series>& series, const WindowedRqaOptions& opt);

/// One analysis over the whole recording (a single full-length window).
WindowRqa whole_rqa(const std::vector<Series>& series, const WindowedRqaOptions& opt);

/// Three-level change map between two matrices of equal shape.
enum class CellChange : std::uint8_t { kUnchanged = 0, kLost = 1, kGained = 2 };

struct DifferenceMap {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<CellChange> cells;  // row-major
  CellChange at(std::size_t i, std::size_t j) const { return cells[i * cols + j]; }
  std::size_t count(CellChange c) const;
};

std::string to_string(RecurrenceMode mode);
std::string to_string(Rescale rescale);
Rescale parse_rescale(const std::string& text);

}  // namespace posedyn
