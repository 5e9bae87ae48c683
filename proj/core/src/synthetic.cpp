#include "splatprune/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "splatprune/error.hpp"
#include "splatprune/ply.hpp"
#include "splatprune/sh.hpp"

namespace splatprune {
namespace {

Quatf random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  double q[4];
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& c : q) {
      c = n(rng);
      norm += c * c;
    }
  } while (norm < 1e-12);
  norm = std::sqrt(norm);
  return {static_cast<float>(q[0] / norm), static_cast<float>(q[1] / norm),
          static_cast<float>(q[2] / norm), static_cast<float>(q[3] / norm)};
}

void random_attributes(GaussianSet& g, std::size_t i, std::mt19937_64& rng) {
  std::normal_distribution<double> log_scale(std::log(0.03), 0.3);
  std::normal_distribution<double> logit(1.0, 1.0);
  std::uniform_real_distribution<double> color(0.0, 1.0);
  std::normal_distribution<double> rest(0.0, 0.02);

  g.rotations[i] = random_rotation(rng);
  for (auto& s : g.log_scales[i]) s = static_cast<float>(log_scale(rng));
  g.opacity_logits[i] = static_cast<float>(logit(rng));
  auto& sh = g.sh_coeffs[i];
  for (int c = 0; c < 3; ++c) sh[c] = static_cast<float>((color(rng) - 0.5) / kShC0);
  for (int k = 3; k < kShFloats; ++k) sh[k] = static_cast<float>(rest(rng));
}

}  // namespace

SyntheticScene make_synthetic(const SyntheticConfig& cfg) {
  if (cfg.n_gaussians < 1) fail(ErrorKind::InvalidParameter, "n_gaussians must be >= 1");
  if (cfg.n_views < 2) fail(ErrorKind::InvalidParameter, "n_views must be >= 2");
  if (cfg.image_size < 1) fail(ErrorKind::InvalidParameter, "image_size must be >= 1");
  if (cfg.test_every < 1) fail(ErrorKind::InvalidParameter, "test_every must be >= 1");

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> pos(-cfg.half_extent, cfg.half_extent);

  SyntheticScene out;
  auto& g = out.scene;
  g.resize(static_cast<std::size_t>(cfg.n_gaussians));
  for (std::size_t i = 0; i < g.count(); ++i) {
    for (auto& p : g.positions[i]) p = static_cast<float>(pos(rng));
    random_attributes(g, i, rng);
  }

  const double focal = cfg.focal * cfg.image_size / 64.0;
  for (int v = 0; v < cfg.n_views; ++v) {
    const double azimuth = 2.0 * std::numbers::pi * v / cfg.n_views;
    const double elevation = (v % 2 == 0 ? 1.0 : -1.0) * cfg.elevation_deg * std::numbers::pi / 180.0;
    const Vec3d eye{cfg.camera_distance * std::cos(elevation) * std::sin(azimuth),
                    cfg.camera_distance * std::sin(elevation),
                    cfg.camera_distance * std::cos(elevation) * std::cos(azimuth)};
    const Camera cam = Camera::look_at(eye, {0, 0, 0}, {0, 1, 0}, focal, cfg.image_size,
                                       cfg.image_size);
    View view;
    char name[32];
    std::snprintf(name, sizeof name, "view_%03d.ppm", v);
    view.name = name;
    view.camera = cam;
    view.test = (v % cfg.test_every) == cfg.test_every - 1;
    view.image = rasterize(g, cam, cfg.background, cfg.render).image;

    ManifestEntry e;
    e.image_path = view.name;
    e.width = cam.width;
    e.height = cam.height;
    e.fx = cam.fx;
    e.fy = cam.fy;
    e.cx = cam.cx;
    e.cy = cam.cy;
    e.world_to_camera = cam.world_to_camera;
    e.test = view.test;
    out.manifest.entries.push_back(e);
    out.views.push_back(std::move(view));
  }
  return out;
}

void save_synthetic(const SyntheticScene& synth, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_ply(synth.scene, dir / "scene.ply");
  for (const auto& v : synth.views) write_ppm(v.image, dir / v.name);
  write_manifest(synth.manifest, dir / "manifest.txt");
}

GaussianSet perturb(const GaussianSet& scene, const Perturbation& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  GaussianSet out = scene;
  for (std::size_t i = 0; i < out.count(); ++i) {
    for (auto& v : out.positions[i]) v = static_cast<float>(v + p.position * n(rng));
    for (auto& v : out.log_scales[i]) v = static_cast<float>(v + p.log_scale * n(rng));
    out.opacity_logits[i] = static_cast<float>(out.opacity_logits[i] + p.opacity_logit * n(rng));
    for (int c = 0; c < 3; ++c) {
      out.sh_coeffs[i][c] = static_cast<float>(out.sh_coeffs[i][c] + p.sh_dc / kShC0 * n(rng));
    }
    for (auto& v : out.rotations[i]) v = static_cast<float>(v + p.rotation * n(rng));
  }
  out.normalize_rotations();
  return out;
}

GaussianSet reinitialize_attributes(const GaussianSet& scene, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GaussianSet out = scene;
  for (std::size_t i = 0; i < out.count(); ++i) random_attributes(out, i, rng);
  return out;
}

}  // namespace splatprune
