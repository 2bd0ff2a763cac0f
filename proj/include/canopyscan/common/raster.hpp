#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace canopyscan {

/// Single-band raster of doubles, row-major.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  Raster() = default;
  Raster(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  std::size_t size() const { return values.size(); }
  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  std::span<const double> view() const { return values; }

  bool same_shape(const Raster& other) const {
    return width == other.width && height == other.height;
  }
  bool operator==(const Raster&) const = default;
};

struct RgbImage {
  Raster r, g, b;

  int width() const { return r.width; }
  int height() const { return r.height; }
  bool operator==(const RgbImage&) const = default;
};

}  // namespace canopyscan
