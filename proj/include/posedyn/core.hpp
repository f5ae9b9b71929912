#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace posedyn {

/// Uniform sampling grid. Sample k occurs at time k / rate.
struct TimeBase {
  double rate = 1.0;
  std::size_t n_samples = 0;

  double time_of(std::size_t k) const { return static_cast<double>(k) / rate; }
};

/// Scalar time series with a per-sample validity mask. Masked samples carry
/// no numeric meaning and are skipped by every metric.
class Series {
 public:
  Series() = default;
  Series(std::vector<double> values, double rate);
  Series(std::vector<double> values, std::vector<std::uint8_t> valid, double rate);

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  double rate() const { return rate_; }
  TimeBase base() const { return {rate_, values_.size()}; }

  double operator[](std::size_t i) const { return values_[i]; }
  bool valid(std::size_t i) const { return valid_[i] != 0; }

  std::span<const double> values() const { return values_; }
  std::span<const std::uint8_t> mask() const { return valid_; }
  std::vector<double>& mutable_values() { return values_; }
  std::vector<std::uint8_t>& mutable_mask() { return valid_; }

  void set(std::size_t i, double v) {
    values_[i] = v;
    valid_[i] = 1;
  }
  void invalidate(std::size_t i) { valid_[i] = 0; }

  std::size_t count_valid() const;
  bool all_valid() const { return count_valid() == size(); }

  /// Samples [begin, end) with the same rate.
  Series slice(std::size_t begin, std::size_t end) const;
  Series reversed() const;

 private:
  std::vector<double> values_;
  std::vector<std::uint8_t> valid_;
  double rate_ = 1.0;
};

/// frames x keypoints x dims coordinate tensor (row-major, dims fastest) with
/// per-(frame, keypoint) confidence and validity.
class PoseSequence {
 public:
  PoseSequence() = default;
  PoseSequence(std::size_t frames, std::size_t keypoints, std::size_t dims, double rate,
               std::vector<std::string> labels = {});

  std::size_t frames() const { return frames_; }
  std::size_t keypoints() const { return keypoints_; }
  std::size_t dims() const { return dims_; }
  double rate() const { return rate_; }
  TimeBase base() const { return {rate_, frames_}; }
  const std::vector<std::string>& labels() const { return labels_; }

  double& coord(std::size_t f, std::size_t k, std::size_t d) {
    return coords_[(f * keypoints_ + k) * dims_ + d];
  }
  double coord(std::size_t f, std::size_t k, std::size_t d) const {
    return coords_[(f * keypoints_ + k) * dims_ + d];
  }
  std::span<const double> point(std::size_t f, std::size_t k) const {
    return {coords_.data() + (f * keypoints_ + k) * dims_, dims_};
  }
  double& confidence(std::size_t f, std::size_t k) { return confidence_[f * keypoints_ + k]; }
  double confidence(std::size_t f, std::size_t k) const { return confidence_[f * keypoints_ + k]; }
  bool valid(std::size_t f, std::size_t k) const { return valid_[f * keypoints_ + k] != 0; }
  void set_valid(std::size_t f, std::size_t k, bool v) { valid_[f * keypoints_ + k] = v ? 1 : 0; }

  /// Index of a keypoint label; throws InputError when absent.
  std::size_t keypoint_index(const std::string& label) const;

  /// One coordinate axis of one keypoint as a Series (mask follows validity).
  Series axis_series(std::size_t k, std::size_t d) const;
  /// Writes a Series back into one axis; validity of the keypoint becomes the
  /// series mask.
  void set_axis_series(std::size_t k, std::size_t d, const Series& s);

  PoseSequence slice_frames(std::size_t begin, std::size_t end) const;

  bool operator==(const PoseSequence&) const = default;

 private:
  std::size_t frames_ = 0;
  std::size_t keypoints_ = 0;
  std::size_t dims_ = 0;
  double rate_ = 1.0;
  std::vector<std::string> labels_;
  std::vector<double> coords_;
  std::vector<double> confidence_;
  std::vector<std::uint8_t> valid_;
};

struct WindowSpec {
  std::size_t length = 0;
  double overlap = 0.0;  // fraction in [0, 1)

  /// round(length * (1 - overlap)); throws InputError on an invalid spec.
  std::size_t step() const;
  void validate() const;
};

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool operator==(const IndexRange&) const = default;
};

/// Full-length windows [k*step, k*step + length); trailing partial windows
/// are dropped. Throws InputError when n < length.
std::vector<IndexRange> make_windows(std::size_t n, const WindowSpec& spec);

/// Parses "L,overlap" (e.g. "3600,0.5").
WindowSpec parse_window_spec(const std::string& text);

}  // namespace posedyn
