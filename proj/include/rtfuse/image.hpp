#ifndef RTFUSE_IMAGE_HPP
#define RTFUSE_IMAGE_HPP

#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace rtfuse {

/**
 * @brief Dense row-major raster used for every image in the pipeline.
 *
 * Pixel (x, y) addresses column x, row y. Continuous coordinates put the
 * origin at the center of the top-left pixel, so pixel k covers the
 * interval [k - 0.5, k + 0.5).
 */
template <class T>
class Image {
public:
  Image() = default;

  Image(int width, int height, T value = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), value) {
    assert(width >= 0 && height >= 0);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t size() const noexcept { return data_.size(); }

  bool in_bounds(int x, int y) const noexcept {
    return x >= 0 && x < width_ && y >= 0 && y < height_;
  }

  template <class U>
  bool same_size(const Image<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  T& operator()(int x, int y) {
    assert(in_bounds(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  const T& operator()(int x, int y) const {
    assert(in_bounds(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::vector<T>& pixels() noexcept { return data_; }
  const std::vector<T>& pixels() const noexcept { return data_; }

  void fill(T value) { data_.assign(data_.size(), value); }

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Radial distance per pixel, meters. NaN marks a missing measurement.
using DepthImage = Image<double>;

/// Temperature per pixel, degrees Celsius. Every pixel holds a measurement.
using ThermalImage = Image<double>;

/// Binary raster: 0 or 255.
using Mask = Image<std::uint8_t>;

inline constexpr double kInvalidDepth = std::numeric_limits<double>::quiet_NaN();
inline constexpr std::uint8_t kMaskSet = 255;

inline bool depth_valid(double d) noexcept { return std::isfinite(d) && d > 0.0; }

/**
 * @brief Temperature raster at depth resolution plus a validity mask.
 *
 * A pixel is valid when its depth pixel projected into the thermal image
 * and the fusion algorithm produced a finite value for it.
 */
struct FusedImage {
  Image<double> temperature;  // °C; meaningful only where valid
  Mask valid;

  FusedImage() = default;
  FusedImage(int width, int height)
      : temperature(width, height, std::numeric_limits<double>::quiet_NaN()),
        valid(width, height, 0) {}

  int width() const noexcept { return temperature.width(); }
  int height() const noexcept { return temperature.height(); }
  bool is_valid(int x, int y) const { return valid(x, y) != 0; }
};

}  // namespace rtfuse

#endif  // RTFUSE_IMAGE_HPP
