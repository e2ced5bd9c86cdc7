#ifndef RTFUSE_CALIBRATION_HPP
#define RTFUSE_CALIBRATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rtfuse/errors.hpp"
#include "rtfuse/geometry.hpp"
#include "rtfuse/image.hpp"

namespace rtfuse {

/// One calibration image pair reduced to its target center.
struct CalibObservation {
  Vec3 tof_point = Vec3::Zero();  // target center in the TOF frame, meters
  PixelCoord ir_center;           // target center on the thermopile array
};

struct CalibResult {
  TaitBryanAngles angles;
  double residual_rms = 0.0;  // per-coordinate RMS, pixels
  int iterations = 0;
  bool converged = false;
  /// Total squared pixel error after the initial point and each accepted step.
  std::vector<double> cost_history;
};

enum class TargetMethod {
  WeightedCentroid,  // center of gravity weighted by temperature
  BinaryCentroid,    // unweighted center of the thresholded mask
  HoughCircle,       // best-scoring circle on the thresholded mask
};

namespace detail {

inline double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double upper = v[mid];
  if (n % 2 == 1) return upper;
  std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
  return 0.5 * (v[mid - 1] + upper);
}

// Mask pixels with at least one 4-neighbour outside the mask (or the image).
inline std::vector<PixelCoord> mask_boundary(const Mask& m) {
  std::vector<PixelCoord> out;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m(x, y)) continue;
      const bool interior = m.in_bounds(x - 1, y) && m(x - 1, y) && m.in_bounds(x + 1, y) &&
                            m(x + 1, y) && m.in_bounds(x, y - 1) && m(x, y - 1) &&
                            m.in_bounds(x, y + 1) && m(x, y + 1);
      if (!interior) out.push_back({double(x), double(y)});
    }
  }
  return out;
}

// Algebraic least-squares circle fit (Kasa). Returns false when the normal
// equations are singular (e.g. collinear points).
inline bool fit_circle(std::span<const PixelCoord> pts, PixelCoord& center, double& radius) {
  if (pts.size() < 3) return false;
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d atb = Eigen::Vector3d::Zero();
  for (const auto& p : pts) {
    const Eigen::Vector3d row(p.u, p.v, 1.0);
    const double rhs = p.u * p.u + p.v * p.v;
    ata += row * row.transpose();
    atb += row * rhs;
  }
  Eigen::FullPivLU<Eigen::Matrix3d> lu(ata);
  if (!lu.isInvertible()) return false;
  const Eigen::Vector3d sol = lu.solve(atb);  // [2a, 2b, r^2 - a^2 - b^2]
  center = {0.5 * sol(0), 0.5 * sol(1)};
  const double rr = sol(2) + center.u * center.u + center.v * center.v;
  if (!(rr > 0.0)) return false;
  radius = std::sqrt(rr);
  return true;
}

}  // namespace detail

/**
 * @brief Sub-pixel center of the heated target on the thermal image.
 *
 * The target is segmented with a robust relative threshold,
 * median(image) + threshold_offset_c. The center of the above-threshold
 * region is located either by center of gravity (temperature-weighted or
 * binary) or by scoring circles of every integer radius up to
 * min(width, height)/2 against the mask boundary and refining the winner
 * with a least-squares circle fit.
 *
 * Throws TargetNotFoundError when no pixel exceeds the threshold.
 */
inline PixelCoord detect_target_thermal(const ThermalImage& img,
                                        TargetMethod method = TargetMethod::WeightedCentroid,
                                        double threshold_offset_c = 5.0) {
  if (img.empty()) throw InvalidInputError("detect_target_thermal: empty image");
  const double threshold = detail::median_of(img.pixels()) + threshold_offset_c;

  Mask mask(img.width(), img.height(), 0);
  std::int64_t hot = 0;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (img(x, y) > threshold) {
        mask(x, y) = kMaskSet;
        ++hot;
      }
  if (hot == 0)
    throw TargetNotFoundError("detect_target_thermal: no pixel above median + " +
                              std::to_string(threshold_offset_c) + " C");

  if (method == TargetMethod::WeightedCentroid || method == TargetMethod::BinaryCentroid) {
    double wsum = 0.0, usum = 0.0, vsum = 0.0;
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) {
        if (!mask(x, y)) continue;
        const double w = method == TargetMethod::WeightedCentroid ? img(x, y) : 1.0;
        wsum += w;
        usum += w * x;
        vsum += w * y;
      }
    if (!(wsum > 0.0))
      throw TargetNotFoundError("detect_target_thermal: non-positive total weight");
    return {usum / wsum, vsum / wsum};
  }

  // Hough: vote over integer centers and radii, then fit the inliers.
  const auto boundary = detail::mask_boundary(mask);
  const int max_radius = std::max(1, std::min(img.width(), img.height()) / 2);
  int best_score = 0, best_r = 0;
  PixelCoord best_c;
  for (int cy = 0; cy < img.height(); ++cy) {
    for (int cx = 0; cx < img.width(); ++cx) {
      for (int r = 1; r <= max_radius; ++r) {
        int score = 0;
        for (const auto& b : boundary) {
          const double d = std::hypot(b.u - cx, b.v - cy);
          if (std::abs(d - r) <= 0.5) ++score;
        }
        if (score > best_score || (score == best_score && score > 0 && r < best_r)) {
          best_score = score;
          best_r = r;
          best_c = {double(cx), double(cy)};
        }
      }
    }
  }
  if (best_score == 0)  // degenerate blob (e.g. a single pixel); fall back
    return detect_target_thermal(img, TargetMethod::BinaryCentroid, threshold_offset_c);

  std::vector<PixelCoord> inliers;
  for (const auto& b : boundary)
    if (std::abs(std::hypot(b.u - best_c.u, b.v - best_c.v) - best_r) <= 1.0)
      inliers.push_back(b);
  PixelCoord fitted = best_c;
  double fitted_r = best_r;
  if (detail::fit_circle(inliers, fitted, fitted_r)) return fitted;
  return best_c;
}

/**
 * @brief 3D center of the target segmented from the range image.
 *
 * The most common depth (histogram mode) is taken as the planar background;
 * foreground pixels are those at least background_gap_m nearer. The result
 * is the foreground's centroid pixel back-projected with the foreground's
 * median depth.
 *
 * Throws TargetNotFoundError when nothing stands in front of the background.
 */
inline Vec3 detect_target_depth(const DepthImage& img, const Intrinsics& k,
                                double background_gap_m = 0.3) {
  if (!(background_gap_m > 0.0))
    throw InvalidInputError("detect_target_depth: background gap must be positive");
  std::vector<double> depths;
  depths.reserve(img.size());
  for (const double d : img.pixels())
    if (depth_valid(d)) depths.push_back(d);
  if (depths.empty()) throw TargetNotFoundError("detect_target_depth: no valid depth pixels");

  const auto [lo_it, hi_it] = std::minmax_element(depths.begin(), depths.end());
  const double lo = *lo_it, hi = *hi_it;
  const double bin_width = background_gap_m / 4.0;
  const int bins = std::max(1, int((hi - lo) / bin_width) + 1);
  std::vector<int> count(bins, 0);
  std::vector<double> sum(bins, 0.0);
  for (const double d : depths) {
    const int b = std::min(bins - 1, int((d - lo) / bin_width));
    ++count[b];
    sum[b] += d;
  }
  int mode = 0;
  for (int b = 1; b < bins; ++b)
    if (count[b] >= count[mode]) mode = b;  // ties resolve to the farther bin
  const double background = sum[mode] / count[mode];

  double usum = 0.0, vsum = 0.0;
  std::vector<double> fg_depths;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const double d = img(x, y);
      if (!depth_valid(d) || d > background - background_gap_m) continue;
      usum += x;
      vsum += y;
      fg_depths.push_back(d);
    }
  if (fg_depths.empty())
    throw TargetNotFoundError("detect_target_depth: no pixels nearer than background by " +
                              std::to_string(background_gap_m) + " m");
  const double n = double(fg_depths.size());
  return depth_to_point({usum / n, vsum / n}, detail::median_of(std::move(fg_depths)), k);
}

/**
 * @brief Pixel distance between the observed IR center and the projection
 * of the TOF point under the given rotation and translation.
 *
 * Throws BehindCameraError when the transformed point has z <= 0.
 */
inline double reprojection_error(const CalibObservation& obs, const TaitBryanAngles& angles,
                                 const Vec3& translation, const Intrinsics& ir_intrinsics) {
  const Vec3 q = rotation_from_angles(angles) * obs.tof_point + translation;
  const PixelCoord proj = project_point(q, ir_intrinsics);
  return std::hypot(obs.ir_center.u - proj.u, obs.ir_center.v - proj.v);
}

namespace detail {

// Sum of squared pixel residuals; infinity when a point lands behind the camera.
inline double calib_cost(std::span<const CalibObservation> obs, const Mat3& rot,
                         const Vec3& t, const Intrinsics& k) {
  double cost = 0.0;
  for (const auto& o : obs) {
    const Vec3 q = rot * o.tof_point + t;
    if (!(q.z() > 0.0)) return std::numeric_limits<double>::infinity();
    const double du = o.ir_center.u - (k.fx * q.x() / q.z() + k.cx);
    const double dv = o.ir_center.v - (k.fy * q.y() / q.z() + k.cy);
    cost += du * du + dv * dv;
  }
  return cost;
}

}  // namespace detail

/**
 * @brief Estimates the three rotation parameters from target correspondences.
 *
 * Minimizes the summed squared pixel distance between each observed IR
 * center and the projection of its TOF point, over the Tait-Bryan angles,
 * with the translation held fixed at its measured value. Levenberg-Marquardt
 * with an analytic Jacobian, initialized at (0, 0, 0); the cost is
 * non-increasing across accepted steps. Converged when the step norm drops
 * below 1e-10 or the relative cost change below 1e-12, capped at 200
 * iterations.
 *
 * Throws UnderdeterminedError for fewer than two observations and
 * DegenerateObservationError when an observation starts behind the IR
 * camera at the zero initialization.
 */
inline CalibResult estimate_rotation(std::span<const CalibObservation> observations,
                                     const Vec3& translation, const Intrinsics& ir_intrinsics) {
  constexpr int kMaxIterations = 200;
  constexpr double kStepTol = 1e-10;
  constexpr double kRelCostTol = 1e-12;

  if (observations.size() < 2)
    throw UnderdeterminedError("estimate_rotation: need at least 2 observations, got " +
                               std::to_string(observations.size()));
  for (const auto& o : observations)
    if (!(o.tof_point.z() > 0.0))
      throw InvalidInputError("estimate_rotation: tof_point must have z > 0");

  TaitBryanAngles angles{0.0, 0.0, 0.0};
  double cost = detail::calib_cost(observations, rotation_from_angles(angles), translation,
                                   ir_intrinsics);
  if (!std::isfinite(cost))
    throw DegenerateObservationError(
        "estimate_rotation: an observation lies behind the IR camera at zero rotation");

  CalibResult result;
  result.cost_history.push_back(cost);
  double lambda = 1e-3;
  bool converged = false;
  int iter = 0;

  while (iter < kMaxIterations && !converged) {
    ++iter;
    const Mat3 rot = rotation_from_angles(angles);
    const auto drot = rotation_angle_derivatives(angles);

    Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
    Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
    for (const auto& o : observations) {
      const Vec3 q = rot * o.tof_point + translation;
      const double iz = 1.0 / q.z();
      // residual r = observed - projected; d(projected)/dq rows for u and v
      const Eigen::RowVector3d du_dq(ir_intrinsics.fx * iz, 0.0,
                                     -ir_intrinsics.fx * q.x() * iz * iz);
      const Eigen::RowVector3d dv_dq(0.0, ir_intrinsics.fy * iz,
                                     -ir_intrinsics.fy * q.y() * iz * iz);
      Eigen::Matrix<double, 2, 3> jac;  // of the residual, hence the minus
      for (int p = 0; p < 3; ++p) {
        const Vec3 dq = drot[p] * o.tof_point;
        jac(0, p) = -du_dq * dq;
        jac(1, p) = -dv_dq * dq;
      }
      const Eigen::Vector2d res(o.ir_center.u - (ir_intrinsics.fx * q.x() * iz + ir_intrinsics.cx),
                                o.ir_center.v - (ir_intrinsics.fy * q.y() * iz + ir_intrinsics.cy));
      jtj += jac.transpose() * jac;
      jtr += jac.transpose() * res;
    }

    Eigen::Matrix3d damped = jtj;
    damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
    const Eigen::Vector3d step = damped.ldlt().solve(-jtr);
    const TaitBryanAngles trial{angles.a1 + step(0), angles.a2 + step(1), angles.a3 + step(2)};
    const double trial_cost = detail::calib_cost(observations, rotation_from_angles(trial),
                                                 translation, ir_intrinsics);

    if (trial_cost < cost) {
      const double rel_drop = (cost - trial_cost) / std::max(cost, 1e-300);
      angles = trial;
      cost = trial_cost;
      result.cost_history.push_back(cost);
      lambda = std::max(lambda * 0.3, 1e-12);
      if (step.norm() < kStepTol || rel_drop < kRelCostTol) converged = true;
    } else {
      if (step.norm() < kStepTol) converged = true;  // no improving direction left
      lambda *= 10.0;
      if (lambda > 1e14) break;
    }
  }

  result.angles = angles.wrapped();
  result.iterations = iter;
  result.converged = converged;
  result.residual_rms = std::sqrt(cost / (2.0 * double(observations.size())));
  return result;
}

}  // namespace rtfuse

#endif  // RTFUSE_CALIBRATION_HPP
