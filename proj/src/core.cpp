#include "posedyn/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "posedyn/error.hpp"

namespace posedyn {

Series::Series(std::vector<double> values, double rate)
    : values_(std::move(values)), valid_(values_.size(), 1), rate_(rate) {
  if (!(rate_ > 0.0)) throw InputError("sampling rate must be positive");
}

Series::Series(std::vector<double> values, std::vector<std::uint8_t> valid, double rate)
    : values_(std::move(values)), valid_(std::move(valid)), rate_(rate) {
  if (!(rate_ > 0.0)) throw InputError("sampling rate must be positive");
  if (values_.size() != valid_.size()) throw InputError("series values and mask differ in length");
}

std::size_t Series::count_valid() const {
  return static_cast<std::size_t>(std::count_if(valid_.begin(), valid_.end(), [](auto v) { return v != 0; }));
}

Series Series::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw InputError("series slice out of range");
  return Series({values_.begin() + begin, values_.begin() + end},
                {valid_.begin() + begin, valid_.begin() + end}, rate_);
}

Series Series::reversed() const {
  return Series({values_.rbegin(), values_.rend()}, {valid_.rbegin(), valid_.rend()}, rate_);
}

PoseSequence::PoseSequence(std::size_t frames, std::size_t keypoints, std::size_t dims, double rate,
                           std::vector<std::string> labels)
    : frames_(frames),
      keypoints_(keypoints),
      dims_(dims),
      rate_(rate),
      labels_(std::move(labels)),
      coords_(frames * keypoints * dims, 0.0),
      confidence_(frames * keypoints, 1.0),
      valid_(frames * keypoints, 1) {
  if (dims != 2 && dims != 3) throw InputError("pose dims must be 2 or 3");
  if (!(rate > 0.0)) throw InputError("sampling rate must be positive");
  if (labels_.empty()) {
    for (std::size_t k = 0; k < keypoints; ++k) labels_.push_back(std::to_string(k));
  }
  if (labels_.size() != keypoints) throw InputError("keypoint label count does not match keypoints");
  auto sorted = labels_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw InputError("keypoint labels must be unique");
}

std::size_t PoseSequence::keypoint_index(const std::string& label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) throw InputError("unknown keypoint '" + label + "'");
  return static_cast<std::size_t>(it - labels_.begin());
}

Series PoseSequence::axis_series(std::size_t k, std::size_t d) const {
  std::vector<double> v(frames_);
  std::vector<std::uint8_t> m(frames_);
  for (std::size_t f = 0; f < frames_; ++f) {
    v[f] = coord(f, k, d);
    m[f] = valid_[f * keypoints_ + k];
  }
  return Series(std::move(v), std::move(m), rate_);
}

void PoseSequence::set_axis_series(std::size_t k, std::size_t d, const Series& s) {
  if (s.size() != frames_) throw InputError("axis series length does not match frame count");
  for (std::size_t f = 0; f < frames_; ++f) {
    coord(f, k, d) = s[f];
    valid_[f * keypoints_ + k] = s.valid(f) ? 1 : 0;
  }
}

PoseSequence PoseSequence::slice_frames(std::size_t begin, std::size_t end) const {
  if (begin > end || end > frames_) throw InputError("frame slice out of range");
  PoseSequence out(end - begin, keypoints_, dims_, rate_, labels_);
  const std::size_t stride = keypoints_ * dims_;
  std::copy(coords_.begin() + begin * stride, coords_.begin() + end * stride, out.coords_.begin());
  std::copy(confidence_.begin() + begin * keypoints_, confidence_.begin() + end * keypoints_,
            out.confidence_.begin());
  std::copy(valid_.begin() + begin * keypoints_, valid_.begin() + end * keypoints_, out.valid_.begin());
  return out;
}

void WindowSpec::validate() const {
  if (length < 2) throw InputError("window length must be at least 2 samples");
  if (!(overlap >= 0.0 && overlap < 1.0)) throw InputError("window overlap must lie in [0, 1)");
  if (step() < 1) throw InputError("window step rounds to zero; reduce overlap");
}

std::size_t WindowSpec::step() const {
  return static_cast<std::size_t>(std::llround(static_cast<double>(length) * (1.0 - overlap)));
}

std::vector<IndexRange> make_windows(std::size_t n, const WindowSpec& spec) {
  spec.validate();
  if (n < spec.length) {
    throw InputError("series of " + std::to_string(n) + " samples is shorter than the window; need at least " +
                     std::to_string(spec.length));
  }
  const std::size_t step = spec.step();
  std::vector<IndexRange> out;
  out.reserve((n - spec.length) / step + 1);
  for (std::size_t start = 0; start + spec.length <= n; start += step) out.push_back({start, start + spec.length});
  return out;
}

WindowSpec parse_window_spec(const std::string& text) {
  std::istringstream in(text);
  WindowSpec spec;
  char comma = 0;
  if (!(in >> spec.length >> comma >> spec.overlap) || comma != ',')
    throw InputError("window spec must look like L,overlap (got '" + text + "')");
  spec.validate();
  return spec;
}

}  // namespace posedyn
