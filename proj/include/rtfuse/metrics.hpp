#ifndef RTFUSE_METRICS_HPP
#define RTFUSE_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "rtfuse/errors.hpp"
#include "rtfuse/image.hpp"

namespace rtfuse {

/// Per-pixel absolute difference to the ground truth. Pixels the fusion
/// left invalid carry NaN and are excluded from all statistics.
inline Image<double> error_map(const FusedImage& fused, const ThermalImage& truth) {
  if (!fused.temperature.same_size(truth))
    throw ShapeError("error_map: fused and truth dimensions differ");
  Image<double> out(truth.width(), truth.height(), std::numeric_limits<double>::quiet_NaN());
  for (int y = 0; y < truth.height(); ++y)
    for (int x = 0; x < truth.width(); ++x)
      if (fused.is_valid(x, y)) out(x, y) = std::abs(fused.temperature(x, y) - truth(x, y));
  return out;
}

/// Arithmetic mean of an error map over its valid (finite) pixels.
inline double mean_abs_error(const Image<double>& errors) {
  double sum = 0.0;
  std::int64_t n = 0;
  for (const double e : errors.pixels())
    if (std::isfinite(e)) {
      sum += e;
      ++n;
    }
  if (n == 0) throw EmptyStatisticsError("mean_abs_error: no valid pixels");
  return sum / double(n);
}

inline double mean_abs_error(const FusedImage& fused, const ThermalImage& truth) {
  return mean_abs_error(error_map(fused, truth));
}

struct ErrorCurvePoint {
  std::int64_t rank = 0;          // pixels included, ascending error order
  double cumulative_error = 0.0;  // °C summed over those pixels
};

/**
 * @brief Accumulated-error curve: pixels sorted by ascending error, the
 * cumulative error sampled at n_bins evenly spaced ranks. The last point
 * covers every valid pixel, so its value equals valid_count * MAE.
 */
inline std::vector<ErrorCurvePoint> accumulated_error_curve(const Image<double>& errors,
                                                            int n_bins) {
  if (n_bins < 1) throw InvalidInputError("accumulated_error_curve: need at least one bin");
  std::vector<double> vals;
  vals.reserve(errors.size());
  for (const double e : errors.pixels())
    if (std::isfinite(e)) vals.push_back(e);
  std::sort(vals.begin(), vals.end());

  std::vector<ErrorCurvePoint> curve;
  const std::int64_t n = std::int64_t(vals.size());
  if (n == 0) return curve;
  std::vector<double> cumulative(vals.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < vals.size(); ++i) cumulative[i] = (acc += vals[i]);

  const int points = int(std::min<std::int64_t>(n_bins, n));
  curve.reserve(points);
  for (int k = 1; k <= points; ++k) {
    const std::int64_t rank = (std::int64_t(k) * n) / points;
    curve.push_back({rank, cumulative[rank - 1]});
  }
  return curve;
}

/// Complete accuracy report for one fused image.
struct ErrorReport {
  Image<double> errors;
  double mean_abs_error_c = 0.0;
  double max_abs_error_c = 0.0;
  std::int64_t valid_pixels = 0;
  std::vector<ErrorCurvePoint> accumulated_curve;
};

inline ErrorReport evaluate_errors(const FusedImage& fused, const ThermalImage& truth,
                                   int curve_bins = 100) {
  ErrorReport report;
  report.errors = error_map(fused, truth);
  report.mean_abs_error_c = mean_abs_error(report.errors);
  for (const double e : report.errors.pixels())
    if (std::isfinite(e)) {
      report.max_abs_error_c = std::max(report.max_abs_error_c, e);
      ++report.valid_pixels;
    }
  report.accumulated_curve = accumulated_error_curve(report.errors, curve_bins);
  return report;
}

}  // namespace rtfuse

#endif  // RTFUSE_METRICS_HPP
