#ifndef RTFUSE_GEOMETRY_HPP
#define RTFUSE_GEOMETRY_HPP

#include <array>
#include <cmath>
#include <string>

#include <Eigen/Core>

#include "rtfuse/errors.hpp"

namespace rtfuse {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Continuous pixel coordinate, (column, row). The origin is the center of
/// the top-left pixel; values may lie outside the sensor rectangle.
struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

/**
 * @brief Pinhole model of one sensor.
 *
 * fx, fy are focal lengths in pixels, (cx, cy) the principal point in
 * pixel coordinates, width/height the sensor resolution.
 */
struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// True when the coordinate falls on the sensor rectangle
  /// [-0.5, width - 0.5) x [-0.5, height - 0.5).
  bool contains(const PixelCoord& p) const noexcept {
    return p.u >= -0.5 && p.u < width - 0.5 && p.v >= -0.5 && p.v < height - 0.5;
  }

  /// Throws InvalidInputError if any field violates its invariant.
  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy))
      throw InvalidInputError("intrinsics: focal lengths must be positive and finite");
    if (width < 1 || height < 1)
      throw InvalidInputError("intrinsics: resolution must be at least 1x1");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
      throw InvalidInputError("intrinsics: principal point must lie inside the sensor");
  }
};

/// Wraps an angle into the canonical range [-pi, pi].
inline double wrap_pi(double a) noexcept {
  constexpr double pi = 3.141592653589793238462643383279502884;
  double r = std::remainder(a, 2.0 * pi);
  if (r < -pi) r += 2.0 * pi;  // remainder returns [-pi, pi]; fold the open edge
  return r;
}

/// The three rotation parameters, radians.
struct TaitBryanAngles {
  double a1 = 0.0;
  double a2 = 0.0;
  double a3 = 0.0;

  TaitBryanAngles wrapped() const noexcept {
    return {wrap_pi(a1), wrap_pi(a2), wrap_pi(a3)};
  }
};

/// Rigid transform taking TOF-frame points into the IR frame.
struct Extrinsics {
  TaitBryanAngles angles;
  Vec3 t = Vec3::Zero();  // meters

  static Extrinsics identity() { return Extrinsics{}; }
};

/// Both sensors' intrinsics plus the transform between them.
struct SensorRig {
  Intrinsics tof;
  Intrinsics ir;
  Extrinsics ext;
};

/**
 * @brief Rotation matrix for the three Tait-Bryan angles.
 *
 * Axis convention: rotate about Z by a3, then Y by a1, then X by a2
 * (passive/frame rotations). Rows 1-2 of the result are
 *   ( c1*c3,            c1*s3,            -s1   )
 *   ( s2*s1*c3 - c2*s3, s2*s1*s3 + c2*c3, c1*s2 )
 * and row 3 completes the orthonormal matrix.
 */
inline Mat3 rotation_from_angles(const TaitBryanAngles& a) noexcept {
  const double s1 = std::sin(a.a1), c1 = std::cos(a.a1);
  const double s2 = std::sin(a.a2), c2 = std::cos(a.a2);
  const double s3 = std::sin(a.a3), c3 = std::cos(a.a3);
  Mat3 r;
  r << c1 * c3, c1 * s3, -s1,
       s2 * s1 * c3 - c2 * s3, s2 * s1 * s3 + c2 * c3, c1 * s2,
       c3 * s1 * c2 + s3 * s2, s3 * s1 * c2 - c3 * s2, c1 * c2;
  return r;
}

/// Partial derivatives of rotation_from_angles with respect to (a1, a2, a3).
inline std::array<Mat3, 3> rotation_angle_derivatives(const TaitBryanAngles& a) noexcept {
  const double s1 = std::sin(a.a1), c1 = std::cos(a.a1);
  const double s2 = std::sin(a.a2), c2 = std::cos(a.a2);
  const double s3 = std::sin(a.a3), c3 = std::cos(a.a3);

  Mat3 d1;
  d1 << -s1 * c3, -s1 * s3, -c1,
        s2 * c1 * c3, s2 * c1 * s3, -s1 * s2,
        c3 * c1 * c2, s3 * c1 * c2, -s1 * c2;

  Mat3 d2;
  d2 << 0.0, 0.0, 0.0,
        c2 * s1 * c3 + s2 * s3, c2 * s1 * s3 - s2 * c3, c1 * c2,
        -c3 * s1 * s2 + s3 * c2, -s3 * s1 * s2 - c3 * c2, -c1 * s2;

  Mat3 d3;
  d3 << -c1 * s3, c1 * c3, 0.0,
        -s2 * s1 * s3 - c2 * c3, s2 * s1 * c3 - c2 * s3, 0.0,
        -s3 * s1 * c2 + c3 * s2, c3 * s1 * c2 + s3 * s2, 0.0;

  return {d1, d2, d3};
}

/**
 * @brief Converts a pixel and its radial distance to 3D coordinates.
 *
 * The measurement is an absolute radial distance, so the returned point
 * satisfies |p| = depth and lies on the ray
 * ((u - cx)/fx, (v - cy)/fy, 1) through the pixel.
 *
 * Throws InvalidInputError for non-positive or non-finite depth.
 */
inline Vec3 depth_to_point(const PixelCoord& pixel, double radial_depth_m, const Intrinsics& k) {
  if (!(radial_depth_m > 0.0) || !std::isfinite(radial_depth_m))
    throw InvalidInputError("depth_to_point: depth must be a positive finite measurement, got " +
                            std::to_string(radial_depth_m));
  Vec3 dir((pixel.u - k.cx) / k.fx, (pixel.v - k.cy) / k.fy, 1.0);
  return dir * (radial_depth_m / dir.norm());
}

/// Applies the rigid transform: R * p + t.
inline Vec3 transform_point(const Vec3& p, const Extrinsics& ext) noexcept {
  return rotation_from_angles(ext.angles) * p + ext.t;
}

/**
 * @brief Projects a camera-frame point onto the pixel array.
 *
 * No clamping is applied; callers decide what to do with coordinates
 * outside the sensor rectangle. Throws BehindCameraError when z <= 0.
 */
inline PixelCoord project_point(const Vec3& p, const Intrinsics& k) {
  if (!(p.z() > 0.0))
    throw BehindCameraError("project_point: point is behind the camera (z = " +
                            std::to_string(p.z()) + ")");
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

}  // namespace rtfuse

#endif  // RTFUSE_GEOMETRY_HPP
