#pragma once

#include <cstddef>
#include <vector>

#include "splatprune/scene.hpp"

namespace splatprune {

/// Interleaved RGB image, row-major, double precision.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

  static Image filled(int w, int h, const Rgb& color);

  std::size_t size() const noexcept { return data.size(); }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width) * height; }

  double& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  double at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }

  bool same_shape(const Image& o) const noexcept { return width == o.width && height == o.height; }
};

/// Rounds to 8-bit and back, as a PPM round trip would.
Image quantize_8bit(const Image& img);

}  // namespace splatprune
