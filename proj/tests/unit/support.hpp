#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "splatprune/image.hpp"
#include "splatprune/renderer.hpp"
#include "splatprune/scene.hpp"
#include "splatprune/sh.hpp"

namespace testing {

using namespace splatprune;

/// A Gaussian at `pos` with isotropic scale, identity rotation and a flat
/// color in the DC band.
inline void add_gaussian(GaussianSet& g, const Vec3f& pos, float log_scale, double opacity,
                         const Rgb& color) {
  const std::size_t i = g.count();
  g.resize(i + 1);
  g.positions[i] = pos;
  g.rotations[i] = {1, 0, 0, 0};
  g.log_scales[i] = {log_scale, log_scale, log_scale};
  g.opacity_logits[i] = static_cast<float>(opacity_logit(opacity));
  g.sh_coeffs[i].fill(0.0f);
  for (int c = 0; c < 3; ++c) g.sh_coeffs[i][c] = static_cast<float>((color[c] - 0.5) / kShC0);
}

/// Camera at the origin looking down +z with the principal point at the
/// image centre.
inline Camera axis_camera(int w, int h, double focal) {
  Camera cam;
  cam.width = w;
  cam.height = h;
  cam.fx = cam.fy = focal;
  cam.cx = (w - 1) / 2.0;
  cam.cy = (h - 1) / 2.0;
  return cam;
}

/// Random scene of n Gaussians placed in front of axis_camera.
inline GaussianSet random_scene(std::uint64_t seed, int n, double spread = 0.6,
                                double depth = 3.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> nrm(0.0, 1.0);
  GaussianSet g;
  g.resize(n);
  for (int i = 0; i < n; ++i) {
    g.positions[i] = {float(spread * u(rng)), float(spread * u(rng)),
                      float(depth + 0.5 * u(rng))};
    Quatd q{nrm(rng), nrm(rng), nrm(rng), nrm(rng)};
    for (int k = 0; k < 4; ++k) g.rotations[i][k] = float(q[k]);
    for (int k = 0; k < 3; ++k) g.log_scales[i][k] = float(std::log(0.25) + 0.3 * nrm(rng));
    g.opacity_logits[i] = float(0.5 * nrm(rng));
    for (int k = 0; k < kShFloats; ++k) {
      g.sh_coeffs[i][k] = float(k < 3 ? 0.5 + 0.3 * u(rng) : 0.1 * nrm(rng));
    }
  }
  return g;
}

inline Image random_image(std::uint64_t seed, int w, int h) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(w, h);
  for (auto& v : img.data) v = u(rng);
  return img;
}

inline bool same_bits(const Image& a, const Image& b) {
  return a.same_shape(b) && a.data == b.data;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("splatprune_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
