#include "splatprune/renderer.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "parallel.hpp"
#include "splatprune/error.hpp"
#include "splatprune/sh.hpp"

namespace splatprune {
namespace {

using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using Mat2 = Eigen::Matrix2d;
using V3 = Eigen::Vector3d;

Mat3 view_rotation(const Camera& cam) {
  Mat3 w;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) w(r, c) = cam.rot(r, c);
  return w;
}

V3 view_translation(const Camera& cam) { return {cam.trans(0), cam.trans(1), cam.trans(2)}; }

V3 to_v3(const Vec3f& v) { return {v[0], v[1], v[2]}; }

/// Everything the forward pass derives from one Gaussian's parameters.
/// Recomputed identically by the backward pass.
struct GaussianGeometry {
  Eigen::Vector4d q_raw;
  double q_norm = 1.0;
  Eigen::Vector4d q_unit;
  Mat3 rot;
  V3 scale;
  Mat3 m;      // rot * diag(scale)
  Mat3 sigma;  // 3D covariance
  V3 t;        // camera-space mean
  Mat23 jac;
  Mat23 tw;    // jac * W
  Mat2 cov2d;
  V3 dir_raw;  // mean - camera centre
  double dir_len = 1.0;
  Vec3d dir{};
  std::array<double, 3> color_raw{};
};

Mat3 quat_to_rot(const Eigen::Vector4d& q) {
  const double r = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - r * z), 2 * (x * z + r * y),
      2 * (x * y + r * z), 1 - 2 * (x * x + z * z), 2 * (y * z - r * x),
      2 * (x * z - r * y), 2 * (y * z + r * x), 1 - 2 * (x * x + y * y);
  return m;
}

GaussianGeometry geometry(const GaussianSet& g, std::size_t i, const Camera& cam,
                          const Mat3& w, const V3& wt, const V3& cam_pos,
                          const RenderConfig& cfg) {
  GaussianGeometry geo;
  const auto& q = g.rotations[i];
  geo.q_raw = {q[0], q[1], q[2], q[3]};
  geo.q_norm = geo.q_raw.norm();
  geo.q_unit = geo.q_norm > 0 ? Eigen::Vector4d(geo.q_raw / geo.q_norm)
                              : Eigen::Vector4d(1, 0, 0, 0);
  geo.rot = quat_to_rot(geo.q_unit);
  const auto& ls = g.log_scales[i];
  geo.scale = {std::exp(double(ls[0])), std::exp(double(ls[1])), std::exp(double(ls[2]))};
  geo.m = geo.rot * geo.scale.asDiagonal();
  geo.sigma = geo.m * geo.m.transpose();

  const V3 mu = to_v3(g.positions[i]);
  geo.t = w * mu + wt;
  const double tx = geo.t[0], ty = geo.t[1], tz = geo.t[2];
  if (cfg.identity_jacobian) {
    geo.jac << 1, 0, 0, 0, 1, 0;
  } else {
    geo.jac << cam.fx / tz, 0, -cam.fx * tx / (tz * tz), 0, cam.fy / tz, -cam.fy * ty / (tz * tz);
  }
  geo.tw = geo.jac * w;
  geo.cov2d = geo.tw * geo.sigma * geo.tw.transpose();
  geo.cov2d(0, 0) += cfg.low_pass;
  geo.cov2d(1, 1) += cfg.low_pass;

  geo.dir_raw = mu - cam_pos;
  geo.dir_len = geo.dir_raw.norm();
  const V3 d = geo.dir_len > 0 ? V3(geo.dir_raw / geo.dir_len) : V3(0, 0, 1);
  geo.dir = {d[0], d[1], d[2]};
  return geo;
}

Splat make_splat(const GaussianSet& g, std::size_t i, const Camera& cam, const Mat3& w,
                 const V3& wt, const V3& cam_pos, const RenderConfig& cfg, int tiles_x,
                 int tiles_y) {
  Splat s;
  const V3 mu = to_v3(g.positions[i]);
  const V3 t = w * mu + wt;
  s.proj.depth = t[2];
  if (!(t[2] >= cam.near_clip)) return s;

  const GaussianGeometry geo = geometry(g, i, cam, w, wt, cam_pos, cfg);
  s.proj.mean2d = {cam.fx * t[0] / t[2] + cam.cx, cam.fy * t[1] / t[2] + cam.cy};
  const double a = geo.cov2d(0, 0), b = 0.5 * (geo.cov2d(0, 1) + geo.cov2d(1, 0)),
               c = geo.cov2d(1, 1);
  s.proj.cov2d = {a, b, c};
  const double det = a * c - b * b;
  if (!(det > 0.0) || !std::isfinite(det)) return s;
  s.conic = {c / det, -b / det, a / det};

  const double mid = 0.5 * (a + c);
  const double lambda_max = mid + std::sqrt(std::max(mid * mid - det, 0.0));
  const double reach = cfg.cutoff_sigma * std::sqrt(lambda_max);
  const double mx = s.proj.mean2d[0], my = s.proj.mean2d[1];
  if (std::isfinite(reach)) {
    if (mx + reach < 0.0 || mx - reach > cam.width - 1 || my + reach < 0.0 ||
        my - reach > cam.height - 1) {
      return s;
    }
    const int ts = cfg.tile_size;
    s.tile_rect = {std::max(0, static_cast<int>(std::floor((mx - reach) / ts))),
                   std::max(0, static_cast<int>(std::floor((my - reach) / ts))),
                   std::min(tiles_x - 1, static_cast<int>(std::floor((mx + reach) / ts))),
                   std::min(tiles_y - 1, static_cast<int>(std::floor((my + reach) / ts)))};
  } else {
    s.tile_rect = {0, 0, tiles_x - 1, tiles_y - 1};
  }

  s.opacity = activated_opacity(g.opacity_logits[i]);
  s.log_skip = cfg.alpha_skip > 0.0 ? std::log(cfg.alpha_skip / s.opacity)
                                    : -std::numeric_limits<double>::infinity();
  const ShBasis basis = sh_basis(geo.dir);
  const auto& coeffs = g.sh_coeffs[i];
  for (int ch = 0; ch < 3; ++ch) {
    double v = 0.0;
    for (int k = 0; k < kShBases; ++k) v += basis[k] * coeffs[k * 3 + ch];
    s.color[ch] = std::max(v + 0.5, 0.0);
  }
  s.proj.visible = true;
  return s;
}

struct FrameSetup {
  Mat3 w;
  V3 wt;
  V3 cam_pos;
  int tiles_x;
  int tiles_y;
};

FrameSetup frame_setup(const Camera& camera, const RenderConfig& cfg) {
  camera.validate();
  if (cfg.tile_size < 1) fail(ErrorKind::InvalidParameter, "tile_size must be >= 1");
  FrameSetup f;
  f.w = view_rotation(camera);
  f.wt = view_translation(camera);
  const Vec3d cp = camera.position();
  f.cam_pos = {cp[0], cp[1], cp[2]};
  f.tiles_x = (camera.width + cfg.tile_size - 1) / cfg.tile_size;
  f.tiles_y = (camera.height + cfg.tile_size - 1) / cfg.tile_size;
  return f;
}

/// Per-pixel evaluation of one splat. Returns false when the splat is
/// skipped at this pixel; the same predicate drives forward and backward.
struct PixelHit {
  double dx, dy, gauss, alpha;
  bool clamped;
};

inline bool eval_splat(const Splat& s, double px, double py, const RenderConfig& cfg,
                       PixelHit& hit) {
  hit.dx = px - s.proj.mean2d[0];
  hit.dy = py - s.proj.mean2d[1];
  const double power = -0.5 * (s.conic[0] * hit.dx * hit.dx + s.conic[2] * hit.dy * hit.dy) -
                       s.conic[1] * hit.dx * hit.dy;
  if (power < s.log_skip) return false;
  hit.gauss = std::exp(power);
  const double raw = s.opacity * hit.gauss;
  hit.clamped = raw > cfg.alpha_max;
  hit.alpha = hit.clamped ? cfg.alpha_max : raw;
  return !(hit.alpha < cfg.alpha_skip);
}

}  // namespace

RenderConfig RenderConfig::exact() {
  RenderConfig cfg;
  cfg.cutoff_sigma = std::numeric_limits<double>::infinity();
  cfg.alpha_skip = 0.0;
  cfg.transmittance_stop = 0.0;
  return cfg;
}

double SceneGradients::full_norm(std::size_t i) const {
  double s = 0.0;
  for (int p = 0; p < kParamsPerGaussian; ++p) s += at(i, p) * at(i, p);
  return std::sqrt(s);
}

std::vector<Projected2D> project(const GaussianSet& gaussians, const Camera& camera,
                                 const RenderConfig& cfg) {
  const FrameSetup f = frame_setup(camera, cfg);
  std::vector<Projected2D> out(gaussians.count());
  for (std::size_t i = 0; i < gaussians.count(); ++i) {
    out[i] = make_splat(gaussians, i, camera, f.w, f.wt, f.cam_pos, cfg, f.tiles_x, f.tiles_y).proj;
  }
  return out;
}

RenderOutput rasterize(const GaussianSet& gaussians, const Camera& camera,
                       const Rgb& background, const RenderConfig& cfg) {
  const FrameSetup f = frame_setup(camera, cfg);
  const std::size_t n = gaussians.count();

  RenderOutput out;
  out.background = background;
  out.config = cfg;
  out.gaussian_count = n;
  out.tiles_x = f.tiles_x;
  out.tiles_y = f.tiles_y;
  out.image = Image(camera.width, camera.height);
  out.final_transmittance.assign(out.image.pixel_count(), 1.0);
  out.contributor_end.assign(out.image.pixel_count(), 0);
  out.splats.resize(n);

  detail::parallel_for(static_cast<int>(n), cfg.threads, [&](int i) {
    out.splats[i] = make_splat(gaussians, static_cast<std::size_t>(i), camera, f.w, f.wt,
                               f.cam_pos, cfg, f.tiles_x, f.tiles_y);
  });

  // Depth order, ties by original index; appending in this order keeps
  // every tile list sorted.
  std::vector<std::uint32_t> order;
  order.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (out.splats[i].proj.visible) order.push_back(static_cast<std::uint32_t>(i));
  }
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    const double da = out.splats[a].proj.depth, db = out.splats[b].proj.depth;
    return da < db || (da == db && a < b);
  });

  out.tile_contributors.assign(static_cast<std::size_t>(f.tiles_x) * f.tiles_y, {});
  for (std::uint32_t g : order) {
    const auto& r = out.splats[g].tile_rect;
    for (int ty = r[1]; ty <= r[3]; ++ty)
      for (int tx = r[0]; tx <= r[2]; ++tx)
        out.tile_contributors[static_cast<std::size_t>(ty) * f.tiles_x + tx].push_back(g);
  }

  const int ts = cfg.tile_size;
  const int tile_count = f.tiles_x * f.tiles_y;
  detail::parallel_for(tile_count, cfg.threads, [&](int tile) {
    const int tx = tile % f.tiles_x, ty = tile / f.tiles_x;
    const auto& list = out.tile_contributors[static_cast<std::size_t>(tile)];
    const int x_end = std::min(camera.width, (tx + 1) * ts);
    const int y_end = std::min(camera.height, (ty + 1) * ts);
    for (int y = ty * ts; y < y_end; ++y) {
      for (int x = tx * ts; x < x_end; ++x) {
        double t = 1.0;
        double c[3] = {0, 0, 0};
        std::uint32_t end = 0;
        PixelHit hit;
        for (std::uint32_t k = 0; k < list.size(); ++k) {
          const Splat& s = out.splats[list[k]];
          if (!eval_splat(s, x, y, cfg, hit)) continue;
          const double next_t = t * (1.0 - hit.alpha);
          if (next_t < cfg.transmittance_stop) break;
          const double w = hit.alpha * t;
          for (int ch = 0; ch < 3; ++ch) c[ch] += s.color[ch] * w;
          t = next_t;
          end = k + 1;
        }
        const std::size_t p = static_cast<std::size_t>(y) * camera.width + x;
        for (int ch = 0; ch < 3; ++ch) out.image.data[p * 3 + ch] = c[ch] + t * background[ch];
        out.final_transmittance[p] = t;
        out.contributor_end[p] = end;
      }
    }
  });
  return out;
}

SceneGradients rasterize_backward(const GaussianSet& gaussians, const Camera& camera,
                                  const RenderOutput& out, const Image& d_image) {
  const RenderConfig& cfg = out.config;
  if (out.gaussian_count != gaussians.count() || out.splats.size() != gaussians.count() ||
      out.image.width != camera.width || out.image.height != camera.height) {
    fail(ErrorKind::InvalidState, "render output does not match the scene/camera");
  }
  if (!d_image.same_shape(out.image)) {
    fail(ErrorKind::InvalidParameter, "upstream gradient image has the wrong shape");
  }
  const FrameSetup f = frame_setup(camera, cfg);
  if (f.tiles_x != out.tiles_x || f.tiles_y != out.tiles_y) {
    fail(ErrorKind::InvalidState, "render output tiling does not match");
  }
  const std::size_t n = gaussians.count();

  // Screen-space partials per tile contributor:
  // [d mean.x, d mean.y, d conic.xx, d conic.xy, d conic.yy, d opacity, d r, d g, d b]
  constexpr int kScreen = 9;
  using ScreenGrad = std::array<double, kScreen>;
  const int ts = cfg.tile_size;
  const int tile_count = f.tiles_x * f.tiles_y;
  std::vector<std::vector<ScreenGrad>> tile_grads(static_cast<std::size_t>(tile_count));

  detail::parallel_for(tile_count, cfg.threads, [&](int tile) {
    const auto& list = out.tile_contributors[static_cast<std::size_t>(tile)];
    auto& grads = tile_grads[static_cast<std::size_t>(tile)];
    grads.assign(list.size(), ScreenGrad{});
    const int tx = tile % f.tiles_x, ty = tile / f.tiles_x;
    const int x_end = std::min(camera.width, (tx + 1) * ts);
    const int y_end = std::min(camera.height, (ty + 1) * ts);
    for (int y = ty * ts; y < y_end; ++y) {
      for (int x = tx * ts; x < x_end; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * camera.width + x;
        const double dc[3] = {d_image.data[p * 3], d_image.data[p * 3 + 1],
                              d_image.data[p * 3 + 2]};
        if (dc[0] == 0.0 && dc[1] == 0.0 && dc[2] == 0.0) continue;
        // Remaining colour behind the current contributor, background included.
        double rest[3] = {out.image.data[p * 3], out.image.data[p * 3 + 1],
                          out.image.data[p * 3 + 2]};
        double t = 1.0;
        PixelHit hit;
        const std::uint32_t end = out.contributor_end[p];
        for (std::uint32_t k = 0; k < end; ++k) {
          const Splat& s = out.splats[list[k]];
          if (!eval_splat(s, x, y, cfg, hit)) continue;
          const double w = hit.alpha * t;
          double d_alpha = 0.0;
          auto& g = grads[k];
          for (int ch = 0; ch < 3; ++ch) {
            rest[ch] -= s.color[ch] * w;
            g[6 + ch] += dc[ch] * w;
            d_alpha += dc[ch] * (s.color[ch] * t - rest[ch] / (1.0 - hit.alpha));
          }
          if (!hit.clamped) {
            const double d_power = d_alpha * s.opacity * hit.gauss;
            g[5] += d_alpha * hit.gauss;
            g[0] += d_power * (s.conic[0] * hit.dx + s.conic[1] * hit.dy);
            g[1] += d_power * (s.conic[1] * hit.dx + s.conic[2] * hit.dy);
            g[2] += d_power * (-0.5 * hit.dx * hit.dx);
            g[3] += d_power * (-hit.dx * hit.dy);
            g[4] += d_power * (-0.5 * hit.dy * hit.dy);
          }
          t *= 1.0 - hit.alpha;
        }
      }
    }
  });

  // Deterministic merge in tile order.
  std::vector<ScreenGrad> screen(n, ScreenGrad{});
  for (int tile = 0; tile < tile_count; ++tile) {
    const auto& list = out.tile_contributors[static_cast<std::size_t>(tile)];
    const auto& grads = tile_grads[static_cast<std::size_t>(tile)];
    for (std::size_t k = 0; k < list.size(); ++k) {
      auto& dst = screen[list[k]];
      for (int j = 0; j < kScreen; ++j) dst[j] += grads[k][j];
    }
  }

  SceneGradients result;
  result.values.assign(n * kParamsPerGaussian, 0.0);
  result.mean2d_norm.assign(n, 0.0);

  detail::parallel_for(static_cast<int>(n), cfg.threads, [&](int gi) {
    const auto i = static_cast<std::size_t>(gi);
    const Splat& s = out.splats[i];
    if (!s.proj.visible) return;
    const ScreenGrad& sg = screen[i];
    const GaussianGeometry geo = geometry(gaussians, i, camera, f.w, f.wt, f.cam_pos, cfg);
    double* grad = &result.values[i * kParamsPerGaussian];

    result.mean2d_norm[i] = std::hypot(sg[0], sg[1]);

    // Opacity logit.
    grad[param::kOpacity] = sg[5] * s.opacity * (1.0 - s.opacity);

    // Colour -> SH coefficients and view direction.
    ShBasis basis;
    std::array<Vec3d, kShBases> dbasis;
    sh_basis_with_gradient(geo.dir, basis, dbasis);
    const auto& coeffs = gaussians.sh_coeffs[i];
    double d_color[3];
    for (int ch = 0; ch < 3; ++ch) {
      double raw = 0.0;
      for (int k = 0; k < kShBases; ++k) raw += basis[k] * coeffs[k * 3 + ch];
      d_color[ch] = raw + 0.5 < 0.0 ? 0.0 : sg[6 + ch];
    }
    V3 d_dir = V3::Zero();
    for (int k = 0; k < kShBases; ++k) {
      double weight = 0.0;
      for (int ch = 0; ch < 3; ++ch) {
        grad[param::kShDc + k * 3 + ch] = basis[k] * d_color[ch];
        weight += coeffs[k * 3 + ch] * d_color[ch];
      }
      d_dir += weight * V3(dbasis[k][0], dbasis[k][1], dbasis[k][2]);
    }
    V3 d_mu = V3::Zero();
    if (geo.dir_len > 0) {
      const V3 u(geo.dir[0], geo.dir[1], geo.dir[2]);
      d_mu += (d_dir - u * u.dot(d_dir)) / geo.dir_len;
    }

    // Conic -> 2D covariance: d Sigma' = -Q G Q with G the full-matrix gradient.
    Mat2 q;
    q << s.conic[0], s.conic[1], s.conic[1], s.conic[2];
    Mat2 g_conic;
    g_conic << sg[2], 0.5 * sg[3], 0.5 * sg[3], sg[4];
    const Mat2 d_cov2d = -q * g_conic * q;

    // Sigma' = TW Sigma TW^T + lp I.
    const Mat3 d_sigma = geo.tw.transpose() * d_cov2d * geo.tw;
    const Mat23 d_tw = 2.0 * d_cov2d * geo.tw * geo.sigma;
    const Mat23 d_jac = d_tw * f.w.transpose();

    const double tx = geo.t[0], ty = geo.t[1], tz = geo.t[2];
    const double fx = camera.fx, fy = camera.fy;
    V3 d_t = V3::Zero();
    if (!cfg.identity_jacobian) {
      const double tz2 = tz * tz, tz3 = tz2 * tz;
      d_t[0] += d_jac(0, 2) * (-fx / tz2);
      d_t[1] += d_jac(1, 2) * (-fy / tz2);
      d_t[2] += d_jac(0, 0) * (-fx / tz2) + d_jac(0, 2) * (2.0 * fx * tx / tz3) +
                d_jac(1, 1) * (-fy / tz2) + d_jac(1, 2) * (2.0 * fy * ty / tz3);
    }
    d_t[0] += sg[0] * fx / tz;
    d_t[1] += sg[1] * fy / tz;
    d_t[2] += -sg[0] * fx * tx / (tz * tz) - sg[1] * fy * ty / (tz * tz);
    d_mu += f.w.transpose() * d_t;
    for (int k = 0; k < 3; ++k) grad[param::kPosition + k] = d_mu[k];

    // Sigma = M M^T, M = R diag(s).
    const Mat3 d_m = 2.0 * d_sigma * geo.m;
    for (int j = 0; j < 3; ++j) {
      double ds = 0.0;
      for (int r = 0; r < 3; ++r) ds += d_m(r, j) * geo.rot(r, j);
      grad[param::kLogScale + j] = ds * geo.scale[j];
    }
    const Mat3 d_r = d_m * geo.scale.asDiagonal();
    const double qr = geo.q_unit[0], qx = geo.q_unit[1], qy = geo.q_unit[2], qz = geo.q_unit[3];
    Eigen::Vector4d d_qu;
    d_qu[0] = 2 * (qz * (d_r(1, 0) - d_r(0, 1)) + qy * (d_r(0, 2) - d_r(2, 0)) +
                   qx * (d_r(2, 1) - d_r(1, 2)));
    d_qu[1] = 2 * (qy * (d_r(1, 0) + d_r(0, 1)) + qz * (d_r(2, 0) + d_r(0, 2)) +
                   qr * (d_r(2, 1) - d_r(1, 2))) -
              4 * qx * (d_r(1, 1) + d_r(2, 2));
    d_qu[2] = 2 * (qx * (d_r(1, 0) + d_r(0, 1)) + qr * (d_r(0, 2) - d_r(2, 0)) +
                   qz * (d_r(2, 1) + d_r(1, 2))) -
              4 * qy * (d_r(0, 0) + d_r(2, 2));
    d_qu[3] = 2 * (qr * (d_r(1, 0) - d_r(0, 1)) + qx * (d_r(2, 0) + d_r(0, 2)) +
                   qy * (d_r(2, 1) + d_r(1, 2))) -
              4 * qz * (d_r(0, 0) + d_r(1, 1));
    if (geo.q_norm > 0) {
      const Eigen::Vector4d d_q = (d_qu - geo.q_unit * geo.q_unit.dot(d_qu)) / geo.q_norm;
      for (int k = 0; k < 4; ++k) grad[param::kRotation + k] = d_q[k];
    }
  });
  return result;
}

void GradientStats::reset(std::size_t n) {
  accum_grad_norm.assign(n, 0.0);
  hit_count.assign(n, 0);
}

std::vector<double> GradientStats::scores(GradientReduction reduction) const {
  std::vector<double> s(size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = reduction == GradientReduction::Sum
               ? accum_grad_norm[i]
               : accum_grad_norm[i] / std::max<std::uint32_t>(hit_count[i], 1u);
  }
  return s;
}

void accumulate_gradient_stats(GradientStats& stats, std::span<const double> norms) {
  if (norms.size() != stats.size()) {
    fail(ErrorKind::InvalidParameter, "gradient norm count does not match stats length");
  }
  for (std::size_t i = 0; i < norms.size(); ++i) {
    stats.accum_grad_norm[i] += norms[i];
    if (norms[i] > 0.0) ++stats.hit_count[i];
  }
}

}  // namespace splatprune
