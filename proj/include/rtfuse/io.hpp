#ifndef RTFUSE_IO_HPP
#define RTFUSE_IO_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rtfuse/detection.hpp"
#include "rtfuse/errors.hpp"
#include "rtfuse/geometry.hpp"
#include "rtfuse/image.hpp"
#include "rtfuse/metrics.hpp"
#include "rtfuse/simulation.hpp"

// On-disk formats. All binary output is explicitly little-endian and all
// text output uses LF line endings, independent of platform.
//
//   DepthImage    16-bit binary PGM (P5), value = millimeters, 0 = invalid
//   Thermal/Fused CSV of decimal °C, row-major; nan = invalid
//   Mask          8-bit binary PGM, 0 / 255
//   Calibration   key = value lines (intrinsics, translation, angles)
//   SceneSpec     one directive per line; '#' starts a comment

namespace rtfuse {

namespace detail {

[[noreturn]] inline void parse_fail(const std::string& path, std::size_t line,
                                    const std::string& what) {
  throw ParseError(path + ":" + std::to_string(line) + ": " + what);
}

inline std::ofstream open_out(const std::string& path, std::ios::openmode mode = {}) {
  std::ofstream out(path, mode | std::ios::binary);  // binary: keep LF on every platform
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

inline std::ifstream open_in(const std::string& path, std::ios::openmode mode = {}) {
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot open: " + path);
  return in;
}

// Reads one whitespace-delimited PGM header token, skipping '#' comments.
inline std::string pgm_token(std::istream& in, const std::string& path) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(char(c));
  }
  if (tok.empty()) throw ParseError(path + ": truncated PGM header");
  return tok;
}

inline long pgm_int(std::istream& in, const std::string& path) {
  const std::string tok = pgm_token(in, path);
  try {
    std::size_t pos = 0;
    const long v = std::stol(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(path + ": bad PGM header token '" + tok + "'");
  }
}

inline void format_double(std::string& out, double v, int significant_digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", significant_digits, v);
  out += buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Depth images: 16-bit PGM, millimeters, little-endian sample bytes.

inline void write_depth_pgm(const DepthImage& img, const std::string& path) {
  auto out = detail::open_out(path);
  out << "P5\n" << img.width() << " " << img.height() << "\n65535\n";
  std::vector<unsigned char> bytes;
  bytes.reserve(img.size() * 2);
  for (const double d : img.pixels()) {
    std::uint16_t v = 0;
    if (depth_valid(d)) {
      const long mm = std::lround(d * 1000.0);
      v = std::uint16_t(std::clamp(mm, 1L, 65535L));
    }
    bytes.push_back(v & 0xFF);
    bytes.push_back(v >> 8);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

inline DepthImage read_depth_pgm(const std::string& path) {
  auto in = detail::open_in(path, std::ios::binary);
  if (detail::pgm_token(in, path) != "P5") throw ParseError(path + ": not a binary PGM (P5)");
  const long w = detail::pgm_int(in, path), h = detail::pgm_int(in, path);
  const long maxval = detail::pgm_int(in, path);
  if (w < 1 || h < 1 || w > 1 << 20 || h > 1 << 20)
    throw ParseError(path + ": unreasonable PGM dimensions");
  if (maxval != 65535) throw ParseError(path + ": depth PGM requires maxval 65535");

  DepthImage img(int(w), int(h), kInvalidDepth);
  std::vector<unsigned char> bytes(std::size_t(w) * std::size_t(h) * 2);
  in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
  if (std::size_t(in.gcount()) != bytes.size())
    throw ParseError(path + ": truncated pixel data at byte offset " +
                     std::to_string(in.gcount()));
  for (std::size_t i = 0; i < img.size(); ++i) {
    const std::uint16_t v = std::uint16_t(bytes[2 * i]) | std::uint16_t(bytes[2 * i + 1]) << 8;
    if (v != 0) img[i] = v / 1000.0;
  }
  return img;
}

// ---------------------------------------------------------------------------
// Masks and visualization: 8-bit PGM.

inline void write_mask_pgm(const Mask& mask, const std::string& path) {
  auto out = detail::open_out(path);
  out << "P5\n" << mask.width() << " " << mask.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(mask.pixels().data()), std::streamsize(mask.size()));
  if (!out) throw IoError("write failed: " + path);
}

inline Mask read_mask_pgm(const std::string& path) {
  auto in = detail::open_in(path, std::ios::binary);
  if (detail::pgm_token(in, path) != "P5") throw ParseError(path + ": not a binary PGM (P5)");
  const long w = detail::pgm_int(in, path), h = detail::pgm_int(in, path);
  const long maxval = detail::pgm_int(in, path);
  if (w < 1 || h < 1 || maxval != 255) throw ParseError(path + ": bad mask PGM header");
  Mask mask(int(w), int(h), 0);
  in.read(reinterpret_cast<char*>(mask.pixels().data()), std::streamsize(mask.size()));
  if (std::size_t(in.gcount()) != mask.size()) throw ParseError(path + ": truncated pixel data");
  for (auto& v : mask.pixels()) v = v ? kMaskSet : 0;
  return mask;
}

/// 8-bit grayscale export of a temperature raster: the valid range maps
/// linearly onto [0, 255]; the range is recorded in a comment header line.
/// Invalid pixels render black.
inline void write_temperature_vis_pgm(const Image<double>& temps, const Mask& valid,
                                      const std::string& path) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < temps.size(); ++i)
    if (valid[i] && std::isfinite(temps[i])) {
      lo = std::min(lo, temps[i]);
      hi = std::max(hi, temps[i]);
    }
  if (!(lo <= hi)) lo = hi = 0.0;

  auto out = detail::open_out(path);
  std::string header = "P5\n# temp_range_c ";
  detail::format_double(header, lo, 17);
  header += " ";
  detail::format_double(header, hi, 17);
  header += "\n";
  out << header << temps.width() << " " << temps.height() << "\n255\n";
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  std::vector<unsigned char> bytes(temps.size(), 0);
  for (std::size_t i = 0; i < temps.size(); ++i)
    if (valid[i] && std::isfinite(temps[i]))
      bytes[i] = (unsigned char)(std::lround((temps[i] - lo) * scale));
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Temperature rasters: CSV, row per image row, 'nan' for invalid pixels.

inline void write_temperature_csv(const Image<double>& img, const std::string& path,
                                  int significant_digits = 6) {
  auto out = detail::open_out(path);
  std::string line;
  for (int y = 0; y < img.height(); ++y) {
    line.clear();
    for (int x = 0; x < img.width(); ++x) {
      if (x) line += ",";
      detail::format_double(line, img(x, y), significant_digits);
    }
    line += "\n";
    out << line;
  }
  if (!out) throw IoError("write failed: " + path);
}

inline void write_thermal_csv(const ThermalImage& img, const std::string& path,
                              int significant_digits = 6) {
  write_temperature_csv(img, path, significant_digits);
}

inline void write_fused_csv(const FusedImage& img, const std::string& path,
                            int significant_digits = 6) {
  Image<double> masked = img.temperature;
  for (std::size_t i = 0; i < masked.size(); ++i)
    if (!img.valid[i]) masked[i] = std::numeric_limits<double>::quiet_NaN();
  write_temperature_csv(masked, path, significant_digits);
}

inline Image<double> read_temperature_csv(const std::string& path) {
  auto in = detail::open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = std::min(line.find(',', pos), line.size());
      const std::string cell = line.substr(pos, comma - pos);
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        while (used < cell.size() && std::isspace((unsigned char)cell[used])) ++used;
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        detail::parse_fail(path, lineno, "bad numeric cell '" + cell + "'");
      }
      pos = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      detail::parse_fail(path, lineno, "inconsistent row length");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path + ": empty CSV");
  Image<double> img(int(rows.front().size()), int(rows.size()));
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) img(x, y) = rows[y][x];
  return img;
}

/// Strict reader for measured thermal images: every value must be finite.
inline ThermalImage read_thermal_csv(const std::string& path) {
  ThermalImage img = read_temperature_csv(path);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (!std::isfinite(img(x, y)))
        throw ParseError(path + ": non-finite temperature at row " + std::to_string(y) +
                         ", column " + std::to_string(x));
  return img;
}

/// Fused rasters round-trip through the same CSV; nan marks invalid pixels.
inline FusedImage read_fused_csv(const std::string& path) {
  Image<double> temps = read_temperature_csv(path);
  FusedImage img(temps.width(), temps.height());
  img.temperature = std::move(temps);
  for (std::size_t i = 0; i < img.temperature.size(); ++i)
    if (std::isfinite(img.temperature[i])) img.valid[i] = kMaskSet;
  return img;
}

// ---------------------------------------------------------------------------
// Calibration file: key = value per line.

struct CalibrationFile {
  SensorRig rig;
  bool has_extrinsics = false;  // translation + angles present
};

inline void write_calibration(const SensorRig& rig, const std::string& path) {
  auto out = detail::open_out(path);
  const auto emit = [&](const char* key, double v) {
    std::string line = key;
    line += " = ";
    detail::format_double(line, v, 17);
    line += "\n";
    out << line;
  };
  emit("ir.fx", rig.ir.fx);
  emit("ir.fy", rig.ir.fy);
  emit("ir.cx", rig.ir.cx);
  emit("ir.cy", rig.ir.cy);
  out << "ir.width = " << rig.ir.width << "\n";
  out << "ir.height = " << rig.ir.height << "\n";
  emit("tof.fx", rig.tof.fx);
  emit("tof.fy", rig.tof.fy);
  emit("tof.cx", rig.tof.cx);
  emit("tof.cy", rig.tof.cy);
  out << "tof.width = " << rig.tof.width << "\n";
  out << "tof.height = " << rig.tof.height << "\n";
  emit("t.x", rig.ext.t.x());
  emit("t.y", rig.ext.t.y());
  emit("t.z", rig.ext.t.z());
  emit("angles.a1", rig.ext.angles.a1);
  emit("angles.a2", rig.ext.angles.a2);
  emit("angles.a3", rig.ext.angles.a3);
  if (!out) throw IoError("write failed: " + path);
}

/**
 * @brief Parses a calibration file.
 *
 * The twelve intrinsics keys are required. The six extrinsics keys
 * (t.*, angles.*) are optional as a group, so an intrinsics-only file can
 * seed the calibrate step; has_extrinsics reports which form was read.
 * Unknown and duplicate keys are rejected.
 */
inline CalibrationFile read_calibration(const std::string& path) {
  auto in = detail::open_in(path);
  std::map<std::string, double> values;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key, eq, value, extra;
    if (!(ls >> key)) continue;  // blank line
    if (!(ls >> eq >> value) || eq != "=" || (ls >> extra))
      detail::parse_fail(path, lineno, "expected 'key = value'");
    static const char* known[] = {"ir.fx",      "ir.fy",     "ir.cx",     "ir.cy",
                                  "ir.width",   "ir.height", "tof.fx",    "tof.fy",
                                  "tof.cx",     "tof.cy",    "tof.width", "tof.height",
                                  "t.x",        "t.y",       "t.z",       "angles.a1",
                                  "angles.a2",  "angles.a3"};
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) detail::parse_fail(path, lineno, "unknown key '" + key + "'");
    if (values.count(key)) detail::parse_fail(path, lineno, "duplicate key '" + key + "'");
    try {
      std::size_t used = 0;
      values[key] = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      detail::parse_fail(path, lineno, "bad numeric value '" + value + "'");
    }
  }

  const auto require = [&](const std::string& key) {
    const auto it = values.find(key);
    if (it == values.end()) throw ParseError(path + ": missing required key '" + key + "'");
    return it->second;
  };

  CalibrationFile file;
  file.rig.ir = {require("ir.fx"),  require("ir.fy"),  require("ir.cx"), require("ir.cy"),
                 int(require("ir.width")), int(require("ir.height"))};
  file.rig.tof = {require("tof.fx"), require("tof.fy"), require("tof.cx"), require("tof.cy"),
                  int(require("tof.width")), int(require("tof.height"))};
  file.rig.ir.validate();
  file.rig.tof.validate();

  int n_ext = 0;
  for (const char* k : {"t.x", "t.y", "t.z", "angles.a1", "angles.a2", "angles.a3"})
    n_ext += values.count(k);
  if (n_ext == 6) {
    file.rig.ext.t = Vec3(values["t.x"], values["t.y"], values["t.z"]);
    file.rig.ext.angles = {values["angles.a1"], values["angles.a2"], values["angles.a3"]};
    file.has_extrinsics = true;
  } else if (n_ext != 0) {
    throw ParseError(path + ": extrinsics keys must be given all together or not at all");
  }
  return file;
}

// ---------------------------------------------------------------------------
// Scene description file.

inline void write_scene(const SceneSpec& spec, const std::string& path) {
  auto out = detail::open_out(path);
  std::string text;
  text += "canvas " + std::to_string(spec.canvas_width) + " " +
          std::to_string(spec.canvas_height) + "\n";
  text += "background ";
  detail::format_double(text, spec.background_depth_m, 17);
  text += " ";
  detail::format_double(text, spec.background_temp_c, 17);
  text += "\nnoise ";
  detail::format_double(text, spec.sigma_depth_m, 17);
  text += " ";
  detail::format_double(text, spec.sigma_temp_c, 17);
  text += " " + std::to_string(spec.seed) + "\n";
  for (const auto& p : spec.primitives) {
    if (p.kind == ScenePrimitive::Kind::Rectangle) {
      text += "rect ";
      for (double v : {p.x, p.y, p.w, p.h, p.depth_m, p.temp_c}) {
        detail::format_double(text, v, 17);
        text += " ";
      }
    } else {
      text += "disc ";
      for (double v : {p.x, p.y, p.r, p.depth_m, p.temp_c}) {
        detail::format_double(text, v, 17);
        text += " ";
      }
    }
    text.back() = '\n';
  }
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

inline SceneSpec read_scene(const std::string& path) {
  auto in = detail::open_in(path);
  SceneSpec spec;
  std::string line;
  std::size_t lineno = 0;
  const auto numbers = [&](std::istringstream& ls, int n, double* out) {
    for (int i = 0; i < n; ++i)
      if (!(ls >> out[i])) detail::parse_fail(path, lineno, "expected " + std::to_string(n) +
                                                                " numeric fields");
    std::string extra;
    if (ls >> extra) detail::parse_fail(path, lineno, "trailing content '" + extra + "'");
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string directive;
    if (!(ls >> directive)) continue;
    if (directive == "canvas") {
      double v[2];
      numbers(ls, 2, v);
      spec.canvas_width = int(v[0]);
      spec.canvas_height = int(v[1]);
    } else if (directive == "background") {
      double v[2];
      numbers(ls, 2, v);
      spec.background_depth_m = v[0];
      spec.background_temp_c = v[1];
    } else if (directive == "noise") {
      double v[3];
      numbers(ls, 3, v);
      if (v[0] < 0 || v[1] < 0 || v[2] < 0)
        detail::parse_fail(path, lineno, "noise parameters must be non-negative");
      spec.sigma_depth_m = v[0];
      spec.sigma_temp_c = v[1];
      spec.seed = std::uint64_t(v[2]);
    } else if (directive == "rect") {
      double v[6];
      numbers(ls, 6, v);
      spec.primitives.push_back({ScenePrimitive::Kind::Rectangle, v[0], v[1], v[2], v[3], 0.0,
                                 v[4], v[5]});
    } else if (directive == "disc") {
      double v[5];
      numbers(ls, 5, v);
      spec.primitives.push_back({ScenePrimitive::Kind::Disc, v[0], v[1], 0.0, 0.0, v[2], v[3],
                                 v[4]});
    } else {
      detail::parse_fail(path, lineno, "unknown directive '" + directive + "'");
    }
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Reports, curves, tracks.

inline void write_error_curve_csv(const std::vector<ErrorCurvePoint>& curve,
                                  const std::string& path) {
  auto out = detail::open_out(path);
  out << "# cumulative absolute error (C) over pixels sorted by ascending error\n";
  out << "rank,cumulative_error\n";
  std::string line;
  for (const auto& p : curve) {
    line = std::to_string(p.rank) + ",";
    detail::format_double(line, p.cumulative_error, 9);
    line += "\n";
    out << line;
  }
  if (!out) throw IoError("write failed: " + path);
}

inline void write_error_report(const ErrorReport& report, const std::string& path) {
  auto out = detail::open_out(path);
  std::string text;
  text += "mean_abs_error_c = ";
  detail::format_double(text, report.mean_abs_error_c, 9);
  text += "\nmax_abs_error_c = ";
  detail::format_double(text, report.max_abs_error_c, 9);
  text += "\nvalid_pixels = " + std::to_string(report.valid_pixels) + "\n";
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

inline void write_tracks_csv(const std::vector<Track>& tracks, const std::string& path) {
  auto out = detail::open_out(path);
  out << "frame,track_id,u,v,mean_temp_C,is_person\n";
  // rows ordered by frame, then track id
  struct Row {
    int frame, id;
    const TrackPoint* pt;
  };
  std::vector<Row> rows;
  for (const auto& t : tracks)
    for (const auto& p : t.history) rows.push_back({p.frame, t.id, &p});
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.id < b.id;
  });
  std::string line;
  for (const auto& r : rows) {
    line = std::to_string(r.frame) + "," + std::to_string(r.id) + ",";
    detail::format_double(line, r.pt->centroid.u, 9);
    line += ",";
    detail::format_double(line, r.pt->centroid.v, 9);
    line += ",";
    detail::format_double(line, r.pt->mean_temp_c, 6);
    line += ",";
    line += r.pt->cls == PersonClass::Person ? "1" : "0";
    line += "\n";
    out << line;
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace rtfuse

#endif  // RTFUSE_IO_HPP
