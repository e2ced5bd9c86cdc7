#ifndef RTFUSE_FUSION_HPP
#define RTFUSE_FUSION_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "rtfuse/errors.hpp"
#include "rtfuse/geometry.hpp"
#include "rtfuse/image.hpp"

namespace rtfuse {

/**
 * @brief Continuous IR coordinate of every TOF pixel.
 *
 * An entry is valid when the depth measurement exists, the transformed
 * point lies in front of the IR camera, and the projection falls on the
 * IR sensor rectangle. Valid coordinates lie in
 * [-0.5, ir_width - 0.5) x [-0.5, ir_height - 0.5).
 */
struct ProjectionMap {
  Image<double> u;
  Image<double> v;
  Mask valid;
  int ir_width = 0;
  int ir_height = 0;

  int width() const noexcept { return u.width(); }
  int height() const noexcept { return u.height(); }
  bool is_valid(int x, int y) const { return valid(x, y) != 0; }
};

/**
 * @brief Chains depth back-projection, the rigid transform, and projection
 * for every TOF pixel. Per-pixel failures mark the entry invalid; the map
 * itself is always produced.
 */
inline ProjectionMap build_projection_map(const DepthImage& depth, const Intrinsics& tof_intrinsics,
                                          const Intrinsics& ir_intrinsics, const Extrinsics& ext) {
  ProjectionMap map;
  map.u = Image<double>(depth.width(), depth.height(), 0.0);
  map.v = Image<double>(depth.width(), depth.height(), 0.0);
  map.valid = Mask(depth.width(), depth.height(), 0);
  map.ir_width = ir_intrinsics.width;
  map.ir_height = ir_intrinsics.height;

  const Mat3 rot = rotation_from_angles(ext.angles);
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const double d = depth(x, y);
      if (!depth_valid(d)) continue;
      Vec3 dir((x - tof_intrinsics.cx) / tof_intrinsics.fx,
               (y - tof_intrinsics.cy) / tof_intrinsics.fy, 1.0);
      const Vec3 q = rot * (dir * (d / dir.norm())) + ext.t;
      if (!(q.z() > 0.0)) continue;
      const PixelCoord p{ir_intrinsics.fx * q.x() / q.z() + ir_intrinsics.cx,
                         ir_intrinsics.fy * q.y() / q.z() + ir_intrinsics.cy};
      if (!ir_intrinsics.contains(p)) continue;
      map.u(x, y) = p.u;
      map.v(x, y) = p.v;
      map.valid(x, y) = kMaskSet;
    }
  }
  return map;
}

namespace detail {

// Nearest IR pixel under round-half-away-from-zero, clamped to the array.
inline int nearest_index(double c, int size) noexcept {
  return std::clamp(int(std::lround(c)), 0, size - 1);
}

}  // namespace detail

/// Nearest-neighbour upsampling: each TOF pixel takes the temperature of
/// the IR pixel whose center is closest to its projection.
inline FusedImage fuse_nearest(const ProjectionMap& map, const ThermalImage& thermal) {
  if (thermal.width() != map.ir_width || thermal.height() != map.ir_height)
    throw ShapeError("fuse_nearest: thermal image does not match the projection map");
  FusedImage out(map.width(), map.height());
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x) {
      if (!map.is_valid(x, y)) continue;
      out.temperature(x, y) = thermal(detail::nearest_index(map.u(x, y), thermal.width()),
                                      detail::nearest_index(map.v(x, y), thermal.height()));
      out.valid(x, y) = kMaskSet;
    }
  return out;
}

/// Bilinear upsampling over the four surrounding IR pixel centers; edge
/// projections clamp to the border row/column.
inline FusedImage fuse_bilinear(const ProjectionMap& map, const ThermalImage& thermal) {
  if (thermal.width() != map.ir_width || thermal.height() != map.ir_height)
    throw ShapeError("fuse_bilinear: thermal image does not match the projection map");
  FusedImage out(map.width(), map.height());
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x) {
      if (!map.is_valid(x, y)) continue;
      const double u = map.u(x, y), v = map.v(x, y);
      const int x0 = int(std::floor(u)), y0 = int(std::floor(v));
      const double wx = u - x0, wy = v - y0;
      const int x0c = std::clamp(x0, 0, thermal.width() - 1);
      const int x1c = std::clamp(x0 + 1, 0, thermal.width() - 1);
      const int y0c = std::clamp(y0, 0, thermal.height() - 1);
      const int y1c = std::clamp(y0 + 1, 0, thermal.height() - 1);
      out.temperature(x, y) = (1.0 - wx) * (1.0 - wy) * thermal(x0c, y0c) +
                              wx * (1.0 - wy) * thermal(x1c, y0c) +
                              (1.0 - wx) * wy * thermal(x0c, y1c) + wx * wy * thermal(x1c, y1c);
      out.valid(x, y) = kMaskSet;
    }
  return out;
}

/// One TOF depth sample inside an IR pixel's footprint.
struct FootprintSample {
  int tof_index = 0;  // y * width + x in the depth image
  double depth_m = 0.0;
};

/**
 * @brief TOF pixels grouped by the IR pixel their projection rounds to
 * (same rounding as fuse_nearest).
 */
struct IrFootprints {
  int ir_width = 0;
  int ir_height = 0;
  std::vector<std::vector<FootprintSample>> cells;  // row-major, ir_width * ir_height

  const std::vector<FootprintSample>& at(int x, int y) const {
    return cells[static_cast<std::size_t>(y) * ir_width + x];
  }
};

inline IrFootprints collect_footprints(const ProjectionMap& map, const DepthImage& depth) {
  if (!map.u.same_size(depth))
    throw ShapeError("collect_footprints: depth image does not match the projection map");
  IrFootprints fp;
  fp.ir_width = map.ir_width;
  fp.ir_height = map.ir_height;
  fp.cells.resize(static_cast<std::size_t>(map.ir_width) * map.ir_height);
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x) {
      if (!map.is_valid(x, y)) continue;
      const int i = detail::nearest_index(map.u(x, y), map.ir_width);
      const int j = detail::nearest_index(map.v(x, y), map.ir_height);
      fp.cells[static_cast<std::size_t>(j) * map.ir_width + i].push_back(
          {y * map.width() + x, depth(x, y)});
    }
  return fp;
}

enum class DepthWeightMode {
  Similarity,  // weight ~ 1 / |D - Di|: nearer-in-depth neighbours dominate
  AsPrinted,   // weight ~ |D - Di| (the literal formula)
};

/**
 * @brief Interpolation weights from depth differences to the four
 * neighbouring IR pixels.
 *
 * NaN entries mark neighbours without depth samples; they receive weight 0
 * and the rest renormalize. Weights always sum to 1 when any neighbour is
 * present, and to 0 otherwise.
 *
 * Similarity mode: w_i proportional to 1/max(|D - Di|, eps) with
 * eps = 1e-6 m; neighbours matching the center depth within eps share the
 * full weight. AsPrinted mode: w_i = |D - Di| / sum |D - Dj|; when every
 * difference is zero the weights are uniform.
 */
inline std::array<double, 4> depth_interpolation_weights(double center_depth_m,
                                                         std::span<const double, 4> neighbour_depths_m,
                                                         DepthWeightMode mode) {
  constexpr double kExactEps = 1e-6;  // meters
  std::array<double, 4> w{0.0, 0.0, 0.0, 0.0};
  std::array<double, 4> diff{};
  std::array<bool, 4> present{};
  int n_present = 0;
  for (int i = 0; i < 4; ++i) {
    present[i] = std::isfinite(neighbour_depths_m[i]);
    if (present[i]) {
      diff[i] = std::abs(center_depth_m - neighbour_depths_m[i]);
      ++n_present;
    }
  }
  if (n_present == 0) return w;

  if (mode == DepthWeightMode::Similarity) {
    int n_exact = 0;
    for (int i = 0; i < 4; ++i)
      if (present[i] && diff[i] <= kExactEps) ++n_exact;
    if (n_exact > 0) {
      for (int i = 0; i < 4; ++i)
        if (present[i] && diff[i] <= kExactEps) w[i] = 1.0 / n_exact;
      return w;
    }
    double total = 0.0;
    for (int i = 0; i < 4; ++i)
      if (present[i]) total += (w[i] = 1.0 / diff[i]);
    for (double& x : w) x /= total;
    return w;
  }

  double total = 0.0;
  for (int i = 0; i < 4; ++i)
    if (present[i]) total += diff[i];
  if (total == 0.0) {
    for (int i = 0; i < 4; ++i)
      if (present[i]) w[i] = 1.0 / n_present;
    return w;
  }
  for (int i = 0; i < 4; ++i)
    if (present[i]) w[i] = diff[i] / total;
  return w;
}

/**
 * @brief Depth-weighted interpolation: like bilinear, but the four
 * neighbours are weighted by the depth difference between the current TOF
 * pixel and each neighbour's mean footprint depth instead of by position.
 *
 * Neighbours without depth samples are dropped and the weights
 * renormalize; if all four are empty the pixel falls back to its nearest
 * neighbour's temperature.
 */
inline FusedImage fuse_depth_weighted(const ProjectionMap& map, const ThermalImage& thermal,
                                      const DepthImage& depth,
                                      DepthWeightMode mode = DepthWeightMode::Similarity) {
  if (thermal.width() != map.ir_width || thermal.height() != map.ir_height)
    throw ShapeError("fuse_depth_weighted: thermal image does not match the projection map");
  const IrFootprints fp = collect_footprints(map, depth);
  Image<double> mean_depth(map.ir_width, map.ir_height, std::numeric_limits<double>::quiet_NaN());
  for (int j = 0; j < map.ir_height; ++j)
    for (int i = 0; i < map.ir_width; ++i) {
      const auto& cell = fp.at(i, j);
      if (cell.empty()) continue;
      double s = 0.0;
      for (const auto& smp : cell) s += smp.depth_m;
      mean_depth(i, j) = s / double(cell.size());
    }

  FusedImage out(map.width(), map.height());
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x) {
      if (!map.is_valid(x, y)) continue;
      const double u = map.u(x, y), v = map.v(x, y);
      const int x0 = int(std::floor(u)), y0 = int(std::floor(v));
      const std::array<int, 4> nx = {std::clamp(x0, 0, thermal.width() - 1),
                                     std::clamp(x0 + 1, 0, thermal.width() - 1),
                                     std::clamp(x0, 0, thermal.width() - 1),
                                     std::clamp(x0 + 1, 0, thermal.width() - 1)};
      const std::array<int, 4> ny = {std::clamp(y0, 0, thermal.height() - 1),
                                     std::clamp(y0, 0, thermal.height() - 1),
                                     std::clamp(y0 + 1, 0, thermal.height() - 1),
                                     std::clamp(y0 + 1, 0, thermal.height() - 1)};
      std::array<double, 4> nd{};
      for (int i = 0; i < 4; ++i) nd[i] = mean_depth(nx[i], ny[i]);
      const auto w = depth_interpolation_weights(depth(x, y), std::span<const double, 4>(nd), mode);
      const double wsum = w[0] + w[1] + w[2] + w[3];
      if (wsum == 0.0) {  // no neighbour has samples anywhere near; fall back
        out.temperature(x, y) = thermal(detail::nearest_index(u, thermal.width()),
                                        detail::nearest_index(v, thermal.height()));
      } else {
        double t = 0.0;
        for (int i = 0; i < 4; ++i) t += w[i] * thermal(nx[i], ny[i]);
        out.temperature(x, y) = t;
      }
      out.valid(x, y) = kMaskSet;
    }
  return out;
}

/// One depth segment of an IR pixel footprint.
struct Segment {
  double mean_depth_m = 0.0;
  std::vector<int> members;  // indices into the footprint sample list
  double area = 0.0;         // fraction of the footprint, (0, 1]
};

/// Decomposition of one IR pixel footprint into depth segments
/// (one or two), ordered by ascending mean depth. Areas sum to 1.
struct PixelSegments {
  std::vector<Segment> segments;
  bool mixed() const noexcept { return segments.size() > 1; }
};

/**
 * @brief Splits a footprint's depth samples into segments.
 *
 * Homogeneous footprints (depth standard deviation within
 * homogeneity_tol_m) stay whole. Otherwise the samples are clustered into
 * k = 2 depth groups; on scalar data the optimal 2-means split is a
 * contiguous cut of the sorted values, which is found exactly. Fractional
 * areas are member counts over the footprint size.
 *
 * Throws EmptyFootprintError when no samples are given.
 */
inline PixelSegments segment_footprint(std::span<const FootprintSample> samples,
                                       double homogeneity_tol_m = 0.05) {
  const std::size_t n = samples.size();
  if (n == 0) throw EmptyFootprintError("segment_footprint: no depth samples");

  double mean = 0.0;
  for (const auto& s : samples) mean += s.depth_m;
  mean /= double(n);
  double var = 0.0;
  for (const auto& s : samples) var += (s.depth_m - mean) * (s.depth_m - mean);
  var /= double(n);

  PixelSegments out;
  if (std::sqrt(var) <= homogeneity_tol_m || n == 1) {
    Segment seg;
    seg.mean_depth_m = mean;
    seg.area = 1.0;
    seg.members.resize(n);
    std::iota(seg.members.begin(), seg.members.end(), 0);
    out.segments.push_back(std::move(seg));
    return out;
  }

  // Exact 1D 2-means: scan every contiguous split of the sorted samples.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return samples[a].depth_m < samples[b].depth_m;
  });
  std::vector<double> prefix(n + 1, 0.0), prefix_sq(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = samples[order[i]].depth_m;
    prefix[i + 1] = prefix[i] + d;
    prefix_sq[i + 1] = prefix_sq[i] + d * d;
  }
  const auto sse = [&](std::size_t lo, std::size_t hi) {  // [lo, hi)
    const double cnt = double(hi - lo);
    const double s = prefix[hi] - prefix[lo];
    return (prefix_sq[hi] - prefix_sq[lo]) - s * s / cnt;
  };
  std::size_t best_k = 1;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < n; ++k) {
    const double c = sse(0, k) + sse(k, n);
    if (c < best) {
      best = c;
      best_k = k;
    }
  }

  Segment near, far;
  near.mean_depth_m = prefix[best_k] / double(best_k);
  far.mean_depth_m = (prefix[n] - prefix[best_k]) / double(n - best_k);
  near.area = double(best_k) / double(n);
  far.area = double(n - best_k) / double(n);
  for (std::size_t i = 0; i < best_k; ++i) near.members.push_back(order[i]);
  for (std::size_t i = best_k; i < n; ++i) far.members.push_back(order[i]);
  out.segments.push_back(std::move(near));
  out.segments.push_back(std::move(far));
  return out;
}

/**
 * @brief Temperature of the remaining segment given the measured pixel
 * temperature, the known segment's temperature, and the fractional areas.
 *
 * The thermopile integrates over its footprint, so
 * measured = known_area * known_temp + other_area * other_temp; solving
 * for the unknown lets a small object be hotter or colder than anything
 * the low-resolution sensor measured directly.
 */
inline double compensate_segment_temp(double measured_c, double known_temp_c, double known_area,
                                      double other_area) {
  return (measured_c - known_temp_c * known_area) / other_area;
}

struct SegmentFusionOptions {
  double homogeneity_tol_m = 0.05;
  /// Lower bound applied to the unknown segment's area in the
  /// compensation divide, bounding noise amplification. 0 disables.
  double area_floor = 0.02;
};

/// Per-image counters and per-mixed-pixel records from fuse_segment.
struct SegmentDiagnostics {
  struct MixedPixel {
    int ir_x = 0, ir_y = 0;
    double measured_c = 0.0;     // Tm
    double matched_c = 0.0;      // temperature taken from the homogeneous neighbour
    double compensated_c = 0.0;  // temperature solved for the other segment
    double matched_area = 0.0;
    double other_area = 0.0;  // true fractional area, before any clamping
    bool fallback = false;    // no homogeneous neighbour; Tm used for both segments
    bool clamped = false;
  };
  int mixed_pixels = 0;
  int fallback_pixels = 0;
  int clamped_pixels = 0;
  std::vector<MixedPixel> mixed;
};

/**
 * @brief Segment-decomposition upsampling.
 *
 * Each IR pixel footprint is split by depth. Homogeneous pixels pass the
 * measured temperature through. For mixed pixels, the most homogeneous
 * pixel in the 3x3 neighbourhood (smallest footprint depth spread, ties
 * broken by closest mean depth) donates its measured temperature to the
 * depth-matching segment, and the other segment's temperature is solved
 * from the area-weighted mixing equation. Mixed pixels without a
 * homogeneous neighbour fall back to the measured temperature and are
 * counted in the diagnostics.
 */
inline FusedImage fuse_segment(const ProjectionMap& map, const ThermalImage& thermal,
                               const DepthImage& depth, const SegmentFusionOptions& opts = {},
                               SegmentDiagnostics* diagnostics = nullptr) {
  if (thermal.width() != map.ir_width || thermal.height() != map.ir_height)
    throw ShapeError("fuse_segment: thermal image does not match the projection map");
  const IrFootprints fp = collect_footprints(map, depth);
  const int irw = map.ir_width, irh = map.ir_height;

  std::vector<PixelSegments> segs(fp.cells.size());
  std::vector<double> spread(fp.cells.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<double> cell_mean(fp.cells.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t c = 0; c < fp.cells.size(); ++c) {
    const auto& cell = fp.cells[c];
    if (cell.empty()) continue;
    segs[c] = segment_footprint(cell, opts.homogeneity_tol_m);
    double lo = cell[0].depth_m, hi = cell[0].depth_m, sum = 0.0;
    for (const auto& s : cell) {
      lo = std::min(lo, s.depth_m);
      hi = std::max(hi, s.depth_m);
      sum += s.depth_m;
    }
    spread[c] = hi - lo;
    cell_mean[c] = sum / double(cell.size());
  }

  FusedImage out(map.width(), map.height());
  const auto assign = [&](const std::vector<FootprintSample>& cell, const Segment& seg,
                          double temp) {
    for (const int member : seg.members) {
      const int idx = cell[member].tof_index;
      out.temperature[idx] = temp;
      out.valid[idx] = kMaskSet;
    }
  };

  for (int j = 0; j < irh; ++j) {
    for (int i = 0; i < irw; ++i) {
      const std::size_t c = std::size_t(j) * irw + i;
      const auto& cell = fp.cells[c];
      if (cell.empty()) continue;
      const double measured = thermal(i, j);

      if (!segs[c].mixed()) {
        assign(cell, segs[c].segments[0], measured);
        continue;
      }

      const Segment& seg_near = segs[c].segments[0];
      const Segment& seg_far = segs[c].segments[1];

      // Most homogeneous neighbour in the 3x3 ring around (i, j).
      int best = -1;
      double best_spread = 0.0, best_gap = 0.0;
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          if (di == 0 && dj == 0) continue;
          const int ni = i + di, nj = j + dj;
          if (ni < 0 || ni >= irw || nj < 0 || nj >= irh) continue;
          const std::size_t nc = std::size_t(nj) * irw + ni;
          if (fp.cells[nc].empty() || spread[nc] > opts.homogeneity_tol_m) continue;
          const double gap = std::min(std::abs(cell_mean[nc] - seg_near.mean_depth_m),
                                      std::abs(cell_mean[nc] - seg_far.mean_depth_m));
          if (best < 0 || spread[nc] < best_spread ||
              (spread[nc] == best_spread && gap < best_gap)) {
            best = int(nc);
            best_spread = spread[nc];
            best_gap = gap;
          }
        }

      SegmentDiagnostics::MixedPixel record;
      record.ir_x = i;
      record.ir_y = j;
      record.measured_c = measured;

      if (best < 0) {
        assign(cell, seg_near, measured);
        assign(cell, seg_far, measured);
        record.fallback = true;
        record.matched_c = measured;
        record.compensated_c = measured;
      } else {
        const double donor_temp = thermal(best % irw, best / irw);
        const double donor_depth = cell_mean[std::size_t(best)];
        const bool near_matches = std::abs(donor_depth - seg_near.mean_depth_m) <=
                                  std::abs(donor_depth - seg_far.mean_depth_m);
        const Segment& matched = near_matches ? seg_near : seg_far;
        const Segment& other = near_matches ? seg_far : seg_near;

        double divisor = other.area;
        if (opts.area_floor > 0.0 && divisor < opts.area_floor) {
          divisor = opts.area_floor;
          record.clamped = true;
        }
        const double solved = (measured - donor_temp * matched.area) / divisor;
        assign(cell, matched, donor_temp);
        assign(cell, other, solved);

        record.matched_c = donor_temp;
        record.compensated_c = solved;
        record.matched_area = matched.area;
        record.other_area = other.area;
      }

      if (diagnostics) {
        ++diagnostics->mixed_pixels;
        if (record.fallback) ++diagnostics->fallback_pixels;
        if (record.clamped) ++diagnostics->clamped_pixels;
        diagnostics->mixed.push_back(record);
      }
    }
  }
  return out;
}

}  // namespace rtfuse

#endif  // RTFUSE_FUSION_HPP
