#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "posedyn/align.hpp"
#include "posedyn/core.hpp"
#include "posedyn/pca.hpp"
#include "posedyn/recurrence.hpp"

namespace posedyn {

enum class PoseFormat { kCsv, kPoseJson };

PoseFormat parse_pose_format(const std::string& text);

struct PoseLoadOptions {
  PoseFormat format = PoseFormat::kCsv;
  double rate = 0.0;  // Hz, required
  std::size_t person = 0;
  std::string keypoint_field = "pose_keypoints_2d";
};

/// CSV: header frame,keypoint,x,y[,z][,confidence]; frames run contiguously
/// from the smallest frame index and anything absent is masked.
/// Pose JSON: an array of frames, {"frames": [...]}, a single frame, or a
/// directory of per-frame files. Each frame is {"people": [{field: [x, y, c, ...]}]}.
PoseSequence load_pose(const std::filesystem::path& path, const PoseLoadOptions& opt);

/// Masked (frame, keypoint) rows are written with empty coordinate fields.
void write_pose_csv(const PoseSequence& p, const std::filesystem::path& path);

using Cell = std::variant<std::monostate, double, std::int64_t, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> row);
};

/// Header row then one line per record; doubles use 9 significant digits,
/// absent cells are empty.
void write_metrics_csv(const Table& table, const std::filesystem::path& path);
std::string format_csv_field(const std::string& s);
std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no);

/// Columns frame,<name>... ; masked samples become empty cells. Values are
/// written with 17 significant digits so they read back exactly.
void write_series_csv(const std::vector<std::string>& names, const std::vector<Series>& series,
                      const std::filesystem::path& path);
struct NamedSeries {
  std::vector<std::string> names;
  std::vector<Series> series;
};
NamedSeries read_series_csv(const std::filesystem::path& path, double rate);

/// Binary P5, 255 recurrent / 0 not, row 0 at the bottom.
void write_matrix_pgm(const RecurrenceMatrix& r, const std::filesystem::path& path);
/// Unchanged 0, lost 128, gained 255, row 0 at the bottom.
void write_difference_pgm(const DifferenceMap& d, const std::filesystem::path& path);

struct PgmImage {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> pixels;  // raster order, top row first
};
PgmImage read_pgm(const std::filesystem::path& path);

/// Columns keypoint,x,y[,z].
void write_template_csv(const Template& t, const std::vector<std::string>& labels, const std::filesystem::path& path);
Template read_template_csv(const std::filesystem::path& path, const PoseSequence& reference);

/// Long format kind,component,feature,value with kinds mean, scale, loading,
/// variance and ratio.
void write_pca_csv(const PcaModel& model, const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace posedyn
