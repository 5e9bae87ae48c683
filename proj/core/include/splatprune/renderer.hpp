#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "splatprune/image.hpp"
#include "splatprune/scene.hpp"

namespace splatprune {

/// Rasterizer constants. Defaults follow the stock splatting conventions;
/// `exact()` turns off every truncation so the output is a smooth function
/// of the parameters (used by gradient and conservation checks).
struct RenderConfig {
  int tile_size = 16;
  double cutoff_sigma = 3.0;         // tile overlap / off-screen margin, in std devs
  double alpha_skip = 1.0 / 255.0;   // contributions below this are ignored
  double transmittance_stop = 1e-4;  // stop compositing once T drops below
  double alpha_max = 0.99;
  double low_pass = 0.3;             // px^2 added to the 2D covariance diagonal
  int threads = 0;                   // 0 = hardware concurrency
  bool identity_jacobian = false;    // test hook: replace J by [I2 | 0]

  static RenderConfig exact();
};

struct Projected2D {
  std::array<double, 2> mean2d{};
  std::array<double, 3> cov2d{};  // (xx, xy, yy)
  double depth = 0.0;
  bool visible = false;
};

/// Screen-space record of one Gaussian as used by the rasterizer.
struct Splat {
  Projected2D proj;
  std::array<double, 3> conic{};  // inverse of cov2d, (xx, xy, yy)
  double opacity = 0.0;           // activated
  double log_skip = 0.0;          // exponent below which alpha < alpha_skip
  Rgb color{};
  std::array<int, 4> tile_rect{};  // x0, y0, x1, y1 inclusive
};

struct RenderOutput {
  Image image;
  std::vector<double> final_transmittance;  // height * width
  std::vector<std::uint32_t> contributor_end;  // per pixel: tile-list entries consumed
  std::vector<std::vector<std::uint32_t>> tile_contributors;  // depth ordered
  std::vector<Splat> splats;                                  // one per Gaussian
  Rgb background{};
  RenderConfig config;
  std::size_t gaussian_count = 0;
  int tiles_x = 0;
  int tiles_y = 0;
};

/// Gradients of a scalar loss with respect to every stored parameter,
/// flattened as count x kParamsPerGaussian in the `param::` layout.
struct SceneGradients {
  std::vector<double> values;
  /// |dL/d mean2d| per Gaussian for this backward pass.
  std::vector<double> mean2d_norm;

  std::size_t count() const noexcept { return mean2d_norm.size(); }
  double& at(std::size_t i, int p) { return values[i * kParamsPerGaussian + p]; }
  double at(std::size_t i, int p) const { return values[i * kParamsPerGaussian + p]; }
  /// L2 norm over all 59 parameter gradients of Gaussian i.
  double full_norm(std::size_t i) const;
};

std::vector<Projected2D> project(const GaussianSet& gaussians, const Camera& camera,
                                 const RenderConfig& cfg = {});

RenderOutput rasterize(const GaussianSet& gaussians, const Camera& camera,
                       const Rgb& background, const RenderConfig& cfg = {});

/// Back-propagates dL/d(image) to the scene. `out` must come from rasterize
/// on the same scene and camera.
SceneGradients rasterize_backward(const GaussianSet& gaussians, const Camera& camera,
                                  const RenderOutput& out, const Image& d_image);

enum class GradientReduction { Average, Sum };

/// Per-Gaussian gradient statistics accumulated between prune events.
struct GradientStats {
  std::vector<double> accum_grad_norm;
  std::vector<std::uint32_t> hit_count;

  explicit GradientStats(std::size_t n = 0) { reset(n); }

  void reset(std::size_t n);
  std::size_t size() const noexcept { return accum_grad_norm.size(); }

  /// Average: accum / max(hits, 1). Sum: accum.
  std::vector<double> scores(GradientReduction reduction = GradientReduction::Average) const;
};

void accumulate_gradient_stats(GradientStats& stats, std::span<const double> norms);

}  // namespace splatprune
