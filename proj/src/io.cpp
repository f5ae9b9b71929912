#include "posedyn/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "posedyn/error.hpp"

namespace posedyn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v, int digits) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  if (*b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e) return std::nullopt;
  return v;
}

std::optional<long long> parse_int(const std::string& s) {
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// ---- pose CSV ----

PoseSequence load_pose_csv(const fs::path& path, double rate) {
  const auto lines = read_lines(path);
  std::size_t first = 0;
  while (first < lines.size() && trim(lines[first]).empty()) ++first;
  if (first == lines.size()) throw InputError("empty pose file " + path.string());

  auto header = split_csv_line(lines[first], first + 1);
  for (auto& h : header) h = trim(h);
  auto col = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto c_frame = col("frame"), c_kp = col("keypoint"), c_x = col("x"), c_y = col("y");
  if (!c_frame || !c_kp || !c_x || !c_y) throw ParseError("header must contain frame,keypoint,x,y", first + 1);
  const auto c_z = col("z"), c_conf = col("confidence");
  const std::size_t dims = c_z ? 3 : 2;

  struct Row {
    long long frame;
    std::size_t kp;
    double xyz[3];
    bool has_coords;
    double conf;
  };
  std::vector<Row> rows;
  std::vector<std::string> labels;
  std::unordered_map<std::string, std::size_t> label_index;
  long long min_frame = 0, max_frame = 0;

  for (std::size_t li = first + 1; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    const auto f = split_csv_line(lines[li], li + 1);
    if (f.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(f.size()),
                       li + 1);
    const auto frame = parse_int(trim(f[*c_frame]));
    if (!frame || *frame < 0) throw ParseError("invalid frame index '" + f[*c_frame] + "'", li + 1);
    const std::string label = trim(f[*c_kp]);
    if (label.empty()) throw ParseError("empty keypoint label", li + 1);
    auto [it, inserted] = label_index.emplace(label, labels.size());
    if (inserted) labels.push_back(label);

    Row r{*frame, it->second, {0, 0, 0}, true, 1.0};
    const std::size_t cc[3] = {*c_x, *c_y, c_z ? *c_z : 0};
    std::size_t empty = 0;
    for (std::size_t d = 0; d < dims; ++d) {
      const std::string s = trim(f[cc[d]]);
      if (s.empty()) {
        ++empty;
        continue;
      }
      const auto v = parse_double(s);
      if (!v) throw ParseError("invalid coordinate '" + s + "'", li + 1);
      r.xyz[d] = *v;
    }
    if (empty != 0 && empty != dims) throw ParseError("partially missing coordinates", li + 1);
    r.has_coords = empty == 0;
    if (c_conf) {
      const std::string s = trim(f[*c_conf]);
      if (!s.empty()) {
        const auto v = parse_double(s);
        if (!v) throw ParseError("invalid confidence '" + s + "'", li + 1);
        r.conf = *v;
      }
    }
    if (rows.empty()) {
      min_frame = max_frame = r.frame;
    } else {
      min_frame = std::min(min_frame, r.frame);
      max_frame = std::max(max_frame, r.frame);
    }
    rows.push_back(r);
  }
  if (rows.empty()) throw InputError("pose file has a header but no rows: " + path.string());

  const auto frames = static_cast<std::size_t>(max_frame - min_frame + 1);
  PoseSequence p(frames, labels.size(), dims, rate, labels);
  for (std::size_t f = 0; f < frames; ++f)
    for (std::size_t k = 0; k < labels.size(); ++k) p.set_valid(f, k, false);
  std::vector<std::uint8_t> seen(frames * labels.size(), 0);
  for (const auto& r : rows) {
    const auto f = static_cast<std::size_t>(r.frame - min_frame);
    auto& s = seen[f * labels.size() + r.kp];
    if (s) throw InputError("duplicate row for frame " + std::to_string(r.frame) + ", keypoint " + labels[r.kp]);
    s = 1;
    for (std::size_t d = 0; d < dims; ++d) p.coord(f, r.kp, d) = r.xyz[d];
    p.confidence(f, r.kp) = r.conf;
    p.set_valid(f, r.kp, r.has_coords);
  }
  return p;
}

// ---- pose JSON ----

std::optional<std::vector<double>> person_keypoints(const json& frame, const PoseLoadOptions& opt,
                                                    const std::string& where) {
  if (!frame.is_object()) throw InputError(where + ": frame is not an object");
  const auto people = frame.find("people");
  if (people == frame.end() || !people->is_array()) throw InputError(where + ": missing 'people' array");
  if (opt.person >= people->size()) return std::nullopt;
  const auto& person = (*people)[opt.person];
  const auto kp = person.find(opt.keypoint_field);
  if (kp == person.end() || !kp->is_array()) throw InputError(where + ": missing '" + opt.keypoint_field + "'");
  if (kp->empty()) return std::nullopt;
  if (kp->size() % 3 != 0) throw InputError(where + ": keypoint value count is not divisible by 3");
  std::vector<double> v;
  v.reserve(kp->size());
  for (const auto& x : *kp) {
    if (!x.is_number()) throw InputError(where + ": non-numeric keypoint value");
    v.push_back(x.get<double>());
  }
  return v;
}

PoseSequence assemble_json(const std::vector<json>& frames, const std::vector<std::string>& names,
                           const PoseLoadOptions& opt) {
  if (frames.empty()) throw InputError("pose JSON contains no frames");
  std::vector<std::optional<std::vector<double>>> data;
  std::optional<std::size_t> count;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    data.push_back(person_keypoints(frames[f], opt, names[f]));
    if (!data.back()) continue;
    const std::size_t k = data.back()->size() / 3;
    if (!count) count = k;
    else if (*count != k)
      throw InputError(names[f] + ": inconsistent keypoint count " + std::to_string(k) + " (expected " +
                       std::to_string(*count) + ")");
  }
  if (!count) throw InputError("no frame contains person " + std::to_string(opt.person));
  PoseSequence p(frames.size(), *count, 2, opt.rate);
  for (std::size_t f = 0; f < frames.size(); ++f)
    for (std::size_t k = 0; k < *count; ++k) {
      if (!data[f]) {
        p.set_valid(f, k, false);
        p.confidence(f, k) = 0.0;
        continue;
      }
      const auto& v = *data[f];
      p.coord(f, k, 0) = v[3 * k];
      p.coord(f, k, 1) = v[3 * k + 1];
      p.confidence(f, k) = v[3 * k + 2];
    }
  return p;
}

json parse_json_file(const fs::path& path) {
  const std::string text = read_text_file(path);
  if (trim(text).empty()) throw InputError("empty pose file " + path.string());
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

PoseSequence load_pose_json(const fs::path& path, const PoseLoadOptions& opt) {
  std::vector<json> frames;
  std::vector<std::string> names;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path))
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      frames.push_back(parse_json_file(f));
      names.push_back(f.filename().string());
    }
  } else {
    json doc = parse_json_file(path);
    if (doc.is_object() && doc.contains("frames")) doc = doc["frames"];
    if (doc.is_array()) {
      for (std::size_t i = 0; i < doc.size(); ++i) {
        frames.push_back(doc[i]);
        names.push_back("frame " + std::to_string(i));
      }
    } else {
      frames.push_back(doc);
      names.push_back("frame 0");
    }
  }
  return assemble_json(frames, names, opt);
}

void write_pgm(const fs::path& path, std::size_t width, std::size_t height, const std::vector<std::uint8_t>& raster) {
  auto out = open_out(path);
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  finish(out, path);
}

}  // namespace

PoseFormat parse_pose_format(const std::string& text) {
  if (text == "csv") return PoseFormat::kCsv;
  if (text == "pose-json" || text == "json") return PoseFormat::kPoseJson;
  throw InputError("unknown pose format '" + text + "' (expected csv or pose-json)");
}

PoseSequence load_pose(const fs::path& path, const PoseLoadOptions& opt) {
  if (!(opt.rate > 0.0)) throw InputError("sampling rate must be positive");
  if (!fs::exists(path)) throw IoError("no such file: " + path.string());
  return opt.format == PoseFormat::kCsv ? load_pose_csv(path, opt.rate) : load_pose_json(path, opt);
}

void write_pose_csv(const PoseSequence& p, const fs::path& path) {
  auto out = open_out(path);
  out << "frame,keypoint,x,y" << (p.dims() == 3 ? ",z" : "") << ",confidence\n";
  for (std::size_t f = 0; f < p.frames(); ++f)
    for (std::size_t k = 0; k < p.keypoints(); ++k) {
      out << f << ',' << format_csv_field(p.labels()[k]);
      for (std::size_t d = 0; d < p.dims(); ++d) {
        out << ',';
        if (p.valid(f, k)) out << fmt(p.coord(f, k, d), 17);
      }
      out << ',' << fmt(p.confidence(f, k), 17) << '\n';
    }
  finish(out, path);
}

void Table::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size())
    throw InputError("row has " + std::to_string(row.size()) + " cells, table has " +
                     std::to_string(columns.size()) + " columns");
  rows.push_back(std::move(row));
}

std::string format_csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line_no);
  out.push_back(std::move(cur));
  return out;
}

void write_metrics_csv(const Table& table, const fs::path& path) {
  auto out = open_out(path);
  for (std::size_t c = 0; c < table.columns.size(); ++c)
    out << (c ? "," : "") << format_csv_field(table.columns[c]);
  out << '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size()) throw InputError("metrics rows must share the table's column set");
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) out << fmt(v, 9);
            else if constexpr (std::is_same_v<T, std::int64_t>) out << v;
            else if constexpr (std::is_same_v<T, std::string>) out << format_csv_field(v);
          },
          row[c]);
    }
    out << '\n';
  }
  finish(out, path);
}

void write_series_csv(const std::vector<std::string>& names, const std::vector<Series>& series, const fs::path& path) {
  if (names.size() != series.size()) throw InputError("one name per series required");
  std::size_t n = series.empty() ? 0 : series.front().size();
  for (const auto& s : series)
    if (s.size() != n) throw InputError("series written together must share a length");
  auto out = open_out(path);
  out << "frame";
  for (const auto& nm : names) out << ',' << format_csv_field(nm);
  out << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    out << i;
    for (const auto& s : series) {
      out << ',';
      if (s.valid(i)) out << fmt(s[i], 17);
    }
    out << '\n';
  }
  finish(out, path);
}

NamedSeries read_series_csv(const fs::path& path, double rate) {
  const auto lines = read_lines(path);
  if (lines.empty() || trim(lines[0]).empty()) throw InputError("empty series file " + path.string());
  auto header = split_csv_line(lines[0], 1);
  if (header.size() < 2) throw ParseError("series file needs at least one value column", 1);
  NamedSeries out;
  out.names.assign(header.begin() + 1, header.end());
  std::vector<std::vector<double>> vals(out.names.size());
  std::vector<std::vector<std::uint8_t>> mask(out.names.size());
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    const auto f = split_csv_line(lines[li], li + 1);
    if (f.size() != header.size()) throw ParseError("wrong number of fields", li + 1);
    for (std::size_t c = 1; c < f.size(); ++c) {
      const std::string s = trim(f[c]);
      if (s.empty()) {
        vals[c - 1].push_back(0.0);
        mask[c - 1].push_back(0);
        continue;
      }
      const auto v = parse_double(s);
      if (!v) throw ParseError("invalid value '" + s + "'", li + 1);
      vals[c - 1].push_back(*v);
      mask[c - 1].push_back(1);
    }
  }
  if (vals.front().empty()) throw InputError("series file has no rows: " + path.string());
  for (std::size_t c = 0; c < vals.size(); ++c) out.series.emplace_back(std::move(vals[c]), std::move(mask[c]), rate);
  return out;
}

void write_matrix_pgm(const RecurrenceMatrix& r, const fs::path& path) {
  if (r.rows() == 0 || r.cols() == 0) throw InputError("cannot export an empty recurrence matrix");
  std::vector<std::uint8_t> raster(r.rows() * r.cols());
  for (std::size_t i = 0; i < r.rows(); ++i) {
    const std::size_t y = r.rows() - 1 - i;
    for (std::size_t j = 0; j < r.cols(); ++j) raster[y * r.cols() + j] = r.test(i, j) ? 255 : 0;
  }
  write_pgm(path, r.cols(), r.rows(), raster);
}

void write_difference_pgm(const DifferenceMap& d, const fs::path& path) {
  if (d.rows == 0 || d.cols == 0) throw InputError("cannot export an empty difference map");
  std::vector<std::uint8_t> raster(d.rows * d.cols);
  for (std::size_t i = 0; i < d.rows; ++i) {
    const std::size_t y = d.rows - 1 - i;
    for (std::size_t j = 0; j < d.cols; ++j) {
      const auto c = d.at(i, j);
      raster[y * d.cols + j] = c == CellChange::kUnchanged ? 0 : (c == CellChange::kLost ? 128 : 255);
    }
  }
  write_pgm(path, d.cols, d.rows, raster);
}

PgmImage read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::string magic;
  std::size_t maxval = 0;
  PgmImage img;
  in >> magic >> img.width >> img.height >> maxval;
  if (magic != "P5" || maxval != 255 || !in) throw InputError(path.string() + " is not an 8-bit binary PGM");
  in.get();
  img.pixels.resize(img.width * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!in) throw InputError(path.string() + ": truncated PGM");
  return img;
}

void write_template_csv(const Template& t, const std::vector<std::string>& labels, const fs::path& path) {
  auto out = open_out(path);
  out << "keypoint,x,y" << (t.points.cols() == 3 ? ",z" : "") << '\n';
  for (Eigen::Index r = 0; r < t.points.rows(); ++r) {
    const std::size_t kp = t.keypoints[static_cast<std::size_t>(r)];
    out << format_csv_field(kp < labels.size() ? labels[kp] : std::to_string(kp));
    for (Eigen::Index d = 0; d < t.points.cols(); ++d) out << ',' << fmt(t.points(r, d), 17);
    out << '\n';
  }
  finish(out, path);
}

Template read_template_csv(const fs::path& path, const PoseSequence& reference) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw InputError("empty template file " + path.string());
  const auto header = split_csv_line(lines[0], 1);
  const std::size_t dims = header.size() - 1;
  if (dims != reference.dims()) throw ParseError("template dimensionality does not match the pose data", 1);
  std::vector<std::vector<double>> rows;
  Template t;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    const auto f = split_csv_line(lines[li], li + 1);
    if (f.size() != header.size()) throw ParseError("wrong number of fields", li + 1);
    t.keypoints.push_back(reference.keypoint_index(trim(f[0])));
    std::vector<double> row;
    for (std::size_t d = 0; d < dims; ++d) {
      const auto v = parse_double(trim(f[d + 1]));
      if (!v) throw ParseError("invalid coordinate '" + f[d + 1] + "'", li + 1);
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError("template file has no rows: " + path.string());
  t.points.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dims));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t d = 0; d < dims; ++d) t.points(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d)) = rows[r][d];
  t.source = TemplateSource::kReferenceFrame;
  t.centroid = t.points.colwise().mean();
  return t;
}

void write_pca_csv(const PcaModel& model, const fs::path& path) {
  auto out = open_out(path);
  out << "kind,component,feature,value\n";
  for (Eigen::Index f = 0; f < model.mean.size(); ++f) out << "mean,," << f << ',' << fmt(model.mean(f), 17) << '\n';
  for (Eigen::Index f = 0; f < model.scale.size(); ++f) out << "scale,," << f << ',' << fmt(model.scale(f), 17) << '\n';
  for (Eigen::Index c = 0; c < model.loadings.cols(); ++c)
    for (Eigen::Index f = 0; f < model.loadings.rows(); ++f)
      out << "loading," << c << ',' << f << ',' << fmt(model.loadings(f, c), 17) << '\n';
  for (Eigen::Index c = 0; c < model.explained_variance.size(); ++c)
    out << "variance," << c << ",," << fmt(model.explained_variance(c), 17) << '\n';
  for (Eigen::Index c = 0; c < model.explained_ratio.size(); ++c)
    out << "ratio," << c << ",," << fmt(model.explained_ratio(c), 17) << '\n';
  finish(out, path);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  finish(out, path);
}

}  // namespace posedyn
