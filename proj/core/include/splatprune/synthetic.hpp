#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "splatprune/dataset.hpp"
#include "splatprune/renderer.hpp"
#include "splatprune/scene.hpp"

namespace splatprune {

struct SyntheticConfig {
  std::uint64_t seed = 0;
  int n_gaussians = 2000;
  int n_views = 8;
  int image_size = 64;
  double half_extent = 0.5;    // Gaussians live in [-h, h]^3
  double camera_distance = 1.75;
  double focal = 56.0;         // pixels, for image_size 64; scaled with size
  double elevation_deg = 15.0; // cameras alternate +/- this elevation
  int test_every = 4;          // view i is a test view when i % test_every == test_every - 1
  Rgb background{0.0, 0.0, 0.0};
  RenderConfig render;
};

struct SyntheticScene {
  GaussianSet scene;
  std::vector<View> views;  // in-memory targets at full precision
  DatasetManifest manifest;
};

/// Seeded random scene inside the cube plus a ring of cameras looking at
/// the origin; targets are rendered by this library's rasterizer.
SyntheticScene make_synthetic(const SyntheticConfig& cfg);

/// Writes scene.ply, view_NNN.ppm and manifest.txt into `dir`.
void save_synthetic(const SyntheticScene& synth, const std::filesystem::path& dir);

/// Noise added to a scene in storage space.
struct Perturbation {
  double position = 0.01;
  double log_scale = 0.1;
  double opacity_logit = 0.3;
  double sh_dc = 0.05;
  double rotation = 0.05;
};

GaussianSet perturb(const GaussianSet& scene, const Perturbation& p, std::uint64_t seed);

/// Replaces every learnable attribute except position with a fresh random
/// draw (the "reinitialized skeleton" control).
GaussianSet reinitialize_attributes(const GaussianSet& scene, std::uint64_t seed);

}  // namespace splatprune
