#ifndef RTFUSE_SIMULATION_HPP
#define RTFUSE_SIMULATION_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rtfuse/errors.hpp"
#include "rtfuse/geometry.hpp"
#include "rtfuse/image.hpp"
#include "rtfuse/random.hpp"

namespace rtfuse {

/// Axis-aligned rectangle or disc with uniform depth and temperature.
/// Coordinates are pixel-center coordinates on the canvas; a rectangle
/// covers [x, x + w) x [y, y + h), a disc all pixels within r of (x, y).
struct ScenePrimitive {
  enum class Kind { Rectangle, Disc };
  Kind kind = Kind::Rectangle;
  double x = 0.0, y = 0.0;
  double w = 0.0, h = 0.0;  // rectangle extent
  double r = 0.0;           // disc radius
  double depth_m = 0.0;
  double temp_c = 0.0;

  bool covers(double px, double py) const noexcept {
    if (kind == Kind::Rectangle)
      return px >= x && px < x + w && py >= y && py < y + h;
    const double du = px - x, dv = py - y;
    return du * du + dv * dv <= r * r;
  }
};

/// Description of an artificial evaluation scene.
struct SceneSpec {
  int canvas_width = 160;
  int canvas_height = 120;
  double background_depth_m = 4.0;
  double background_temp_c = 20.0;
  std::vector<ScenePrimitive> primitives;
  double sigma_depth_m = 0.01;
  double sigma_temp_c = 0.5;
  std::uint64_t seed = 1;
};

/// Clean per-pixel temperature and depth at canvas resolution.
struct GroundTruth {
  ThermalImage thermal;
  DepthImage depth;
};

/**
 * @brief Rasterizes the scene: for every pixel the nearest covering
 * primitive wins; uncovered pixels take the background. Deterministic and
 * independent of primitive order for distinct depths (on a depth tie the
 * earlier primitive stays).
 */
inline GroundTruth render_scene(const SceneSpec& spec) {
  if (spec.canvas_width < 1 || spec.canvas_height < 1)
    throw InvalidInputError("render_scene: canvas must be at least 1x1");
  if (!(spec.background_depth_m > 0.0) || !std::isfinite(spec.background_depth_m))
    throw InvalidInputError("render_scene: background depth must be positive");
  for (const auto& p : spec.primitives)
    if (!(p.depth_m > 0.0) || !std::isfinite(p.depth_m))
      throw InvalidInputError("render_scene: primitive depth must be positive");

  GroundTruth gt;
  gt.thermal = ThermalImage(spec.canvas_width, spec.canvas_height, spec.background_temp_c);
  gt.depth = DepthImage(spec.canvas_width, spec.canvas_height, spec.background_depth_m);
  for (int y = 0; y < spec.canvas_height; ++y)
    for (int x = 0; x < spec.canvas_width; ++x)
      for (const auto& p : spec.primitives)
        if (p.covers(x, y) && p.depth_m < gt.depth(x, y)) {
          gt.depth(x, y) = p.depth_m;
          gt.thermal(x, y) = p.temp_c;
        }
  return gt;
}

/**
 * @brief Adds zero-mean Gaussian noise to every valid pixel.
 *
 * Sample i is a pure function of (seed, i), so the result is reproducible
 * across runs and identical under any pixel-parallel schedule. sigma = 0
 * returns the raster bitwise unchanged; non-finite pixels pass through.
 */
inline Image<double> add_noise(const Image<double>& raster, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw InvalidInputError("add_noise: sigma must be non-negative");
  Image<double> out = raster;
  if (sigma == 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (std::isfinite(out[i])) out[i] += sigma * gaussian_at(seed, i);
  return out;
}

/**
 * @brief Downsamples by exact area integration, mimicking a thermopile
 * whose pixels integrate emitted radiation over their whole footprint.
 *
 * Output dimensions need not divide the input; boundary input pixels
 * contribute with exact fractional weights. The global mean is preserved.
 */
inline ThermalImage downsample_area(const ThermalImage& hi, int out_width, int out_height) {
  if (out_width < 1 || out_height < 1)
    throw InvalidInputError("downsample_area: output must be at least 1x1");
  if (out_width > hi.width() || out_height > hi.height())
    throw InvalidInputError("downsample_area: output exceeds input resolution " +
                            std::to_string(hi.width()) + "x" + std::to_string(hi.height()));

  const double sx = double(hi.width()) / out_width;
  const double sy = double(hi.height()) / out_height;
  ThermalImage out(out_width, out_height, 0.0);
  for (int oy = 0; oy < out_height; ++oy) {
    const double y0 = oy * sy, y1 = (oy + 1) * sy;
    const int ky0 = int(std::floor(y0)), ky1 = std::min(hi.height(), int(std::ceil(y1)));
    for (int ox = 0; ox < out_width; ++ox) {
      const double x0 = ox * sx, x1 = (ox + 1) * sx;
      const int kx0 = int(std::floor(x0)), kx1 = std::min(hi.width(), int(std::ceil(x1)));
      double acc = 0.0, area = 0.0;
      for (int ky = ky0; ky < ky1; ++ky) {
        const double wy = std::min(y1, double(ky + 1)) - std::max(y0, double(ky));
        if (wy <= 0.0) continue;
        for (int kx = kx0; kx < kx1; ++kx) {
          const double wx = std::min(x1, double(kx + 1)) - std::max(x0, double(kx));
          if (wx <= 0.0) continue;
          acc += wx * wy * hi(kx, ky);
          area += wx * wy;
        }
      }
      out(ox, oy) = acc / area;
    }
  }
  return out;
}

/**
 * @brief Co-located evaluation rig: identity extrinsics with the IR grid
 * aligned to the area-downsampling grid of the TOF canvas.
 *
 * With these intrinsics a TOF pixel (u, v) projects to exactly
 * ((u + 0.5) * irw/w - 0.5, (v + 0.5) * irh/h - 0.5), so the IR pixel
 * footprints coincide with the downsample blocks and fusion error isolates
 * the upsampling algorithm.
 */
inline SensorRig default_rig(int tof_width = 160, int tof_height = 120, int ir_width = 16,
                             int ir_height = 16, double tof_focal_px = 130.0) {
  SensorRig rig;
  rig.tof = {tof_focal_px, tof_focal_px, (tof_width - 1) / 2.0, (tof_height - 1) / 2.0,
             tof_width, tof_height};
  const double sx = double(ir_width) / tof_width;
  const double sy = double(ir_height) / tof_height;
  rig.ir = {tof_focal_px * sx, tof_focal_px * sy, (rig.tof.cx + 0.5) * sx - 0.5,
            (rig.tof.cy + 0.5) * sy - 0.5, ir_width, ir_height};
  rig.ext = Extrinsics::identity();
  return rig;
}

/// Everything the sensors would deliver for one simulated frame.
struct SimulatedDataset {
  GroundTruth truth;        // clean, canvas resolution
  DepthImage noisy_depth;   // canvas resolution
  ThermalImage thermal_lo;  // thermopile resolution, from the noisy canvas
};

/**
 * @brief Runs the full simulation protocol: render, add noise to both
 * rasters, and area-downsample the noisy temperature image to thermopile
 * resolution. Depth values driven non-positive by noise become invalid.
 */
inline SimulatedDataset simulate_dataset(const SceneSpec& spec, int thermal_width = 16,
                                         int thermal_height = 16) {
  SimulatedDataset ds;
  ds.truth = render_scene(spec);
  ds.noisy_depth = add_noise(ds.truth.depth, spec.sigma_depth_m, derive_stream(spec.seed, 1));
  for (double& d : ds.noisy_depth.pixels())
    if (!(d > 0.0)) d = kInvalidDepth;
  const ThermalImage noisy_hi =
      add_noise(ds.truth.thermal, spec.sigma_temp_c, derive_stream(spec.seed, 2));
  ds.thermal_lo = downsample_area(noisy_hi, thermal_width, thermal_height);
  return ds;
}

/// A rendered calibration shot with its ground-truth centers.
struct CalibrationPair {
  DepthImage depth;
  ThermalImage thermal;
  Vec3 tof_center = Vec3::Zero();  // target center, TOF frame
  PixelCoord ir_center;            // projected center on the IR array
};

/**
 * @brief Renders the circular calibration target as seen by both sensors
 * of an arbitrary (possibly misaligned) rig.
 *
 * The range image shows a disc of uniform radial distance in front of a
 * planar background; the thermal image shows the heated disc against an
 * unheated background, placed through the rig's extrinsics.
 */
inline CalibrationPair render_calibration_pair(const SensorRig& rig, const Vec3& target_center_tof,
                                               double target_radius_m, double target_temp_c = 60.0,
                                               double background_depth_m = 4.0,
                                               double background_temp_c = 20.0) {
  if (!(target_center_tof.z() > 0.0))
    throw InvalidInputError("render_calibration_pair: target must be in front of the TOF camera");
  CalibrationPair pair;
  pair.tof_center = target_center_tof;

  const PixelCoord tof_px = project_point(target_center_tof, rig.tof);
  const double tof_r_px = target_radius_m * rig.tof.fx / target_center_tof.z();
  const double radial = target_center_tof.norm();
  pair.depth = DepthImage(rig.tof.width, rig.tof.height, background_depth_m);
  for (int y = 0; y < rig.tof.height; ++y)
    for (int x = 0; x < rig.tof.width; ++x)
      if (std::hypot(x - tof_px.u, y - tof_px.v) <= tof_r_px) pair.depth(x, y) = radial;

  const Vec3 q = transform_point(target_center_tof, rig.ext);
  pair.ir_center = project_point(q, rig.ir);
  const double ir_r_px = target_radius_m * rig.ir.fx / q.z();
  pair.thermal = ThermalImage(rig.ir.width, rig.ir.height, background_temp_c);
  for (int y = 0; y < rig.ir.height; ++y)
    for (int x = 0; x < rig.ir.width; ++x)
      if (std::hypot(x - pair.ir_center.u, y - pair.ir_center.v) <= ir_r_px)
        pair.thermal(x, y) = target_temp_c;
  return pair;
}

}  // namespace rtfuse

#endif  // RTFUSE_SIMULATION_HPP
