#include "splatprune/image.hpp"

#include <algorithm>
#include <cmath>

namespace splatprune {

Image Image::filled(int w, int h, const Rgb& color) {
  Image img(w, h);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    for (int c = 0; c < 3; ++c) img.data[p * 3 + c] = color[c];
  }
  return img;
}

Image quantize_8bit(const Image& img) {
  Image out = img;
  for (double& v : out.data) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  return out;
}

}  // namespace splatprune
