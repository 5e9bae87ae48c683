#include "splatprune/loss.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "splatprune/error.hpp"
#include "splatprune/ply.hpp"

namespace splatprune {
namespace {

void check_pair(const Image& a, const Image& b) {
  if (!a.same_shape(b) || a.size() != b.size()) {
    fail(ErrorKind::InvalidParameter, "image shapes differ");
  }
}

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(size));
  const int r = size / 2;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - r;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Reflect without repeating the edge sample: -1 -> 1, n -> n-2.
inline int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

/// Single-channel plane filtered by a separable window.
struct Plane {
  int w = 0, h = 0;
  std::vector<double> v;
  Plane(int w_, int h_) : w(w_), h(h_), v(static_cast<std::size_t>(w_) * h_, 0.0) {}
  double& at(int x, int y) { return v[static_cast<std::size_t>(y) * w + x]; }
  double at(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

Plane blur(const Plane& in, const std::vector<double>& k) {
  const int r = static_cast<int>(k.size()) / 2;
  Plane tmp(in.w, in.h), out(in.w, in.h);
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < in.w; ++x) {
      double s = 0.0;
      for (int o = -r; o <= r; ++o) s += k[o + r] * in.at(reflect(x + o, in.w), y);
      tmp.at(x, y) = s;
    }
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < in.w; ++x) {
      double s = 0.0;
      for (int o = -r; o <= r; ++o) s += k[o + r] * tmp.at(x, reflect(y + o, in.h));
      out.at(x, y) = s;
    }
  return out;
}

/// Adjoint of blur(): scatters each output sample back over its window.
Plane blur_adjoint(const Plane& in, const std::vector<double>& k) {
  const int r = static_cast<int>(k.size()) / 2;
  Plane tmp(in.w, in.h), out(in.w, in.h);
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < in.w; ++x)
      for (int o = -r; o <= r; ++o) tmp.at(x, reflect(y + o, in.h)) += k[o + r] * in.at(x, y);
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < in.w; ++x)
      for (int o = -r; o <= r; ++o) out.at(reflect(x + o, in.w), y) += k[o + r] * tmp.at(x, y);
  return out;
}

Plane channel(const Image& img, int c) {
  Plane p(img.width, img.height);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) p.v[i] = img.data[i * 3 + c];
  return p;
}

Plane product(const Plane& a, const Plane& b) {
  Plane p(a.w, a.h);
  for (std::size_t i = 0; i < p.v.size(); ++i) p.v[i] = a.v[i] * b.v[i];
  return p;
}

/// Mean SSIM and, when `grad` is non-null, d(mean SSIM)/d(a).
double ssim_impl(const Image& a, const Image& b, const LossConfig& cfg, Image* grad) {
  check_pair(a, b);
  cfg.validate();
  if (a.width < cfg.ssim_window || a.height < cfg.ssim_window) {
    fail(ErrorKind::InvalidParameter, "image smaller than the SSIM window");
  }
  const auto k = gaussian_window(cfg.ssim_window, cfg.ssim_sigma);
  const double c1 = cfg.ssim_c1, c2 = cfg.ssim_c2;
  const double count = static_cast<double>(a.size());
  if (grad) *grad = Image(a.width, a.height);

  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    const Plane x = channel(a, c), y = channel(b, c);
    const Plane mx = blur(x, k), my = blur(y, k);
    const Plane exx = blur(product(x, x), k), eyy = blur(product(y, y), k),
                exy = blur(product(x, y), k);
    Plane d_m1(a.width, a.height), d_m2(a.width, a.height), d_m12(a.width, a.height);
    for (std::size_t i = 0; i < x.v.size(); ++i) {
      const double ux = mx.v[i], uy = my.v[i];
      const double sxx = exx.v[i] - ux * ux, syy = eyy.v[i] - uy * uy, sxy = exy.v[i] - ux * uy;
      const double n1 = 2 * ux * uy + c1, n2 = 2 * sxy + c2;
      const double d1 = ux * ux + uy * uy + c1, d2 = sxx + syy + c2;
      const double s = (n1 * n2) / (d1 * d2);
      total += s;
      if (grad) {
        const double s_ux = s * (2 * uy / n1 - 2 * ux / d1);
        const double s_sxx = -s / d2;
        const double s_sxy = 2 * s / n2;
        d_m1.v[i] = (s_ux - 2 * ux * s_sxx - uy * s_sxy) / count;
        d_m2.v[i] = s_sxx / count;
        d_m12.v[i] = s_sxy / count;
      }
    }
    if (grad) {
      const Plane g1 = blur_adjoint(d_m1, k), g2 = blur_adjoint(d_m2, k),
                  g12 = blur_adjoint(d_m12, k);
      for (std::size_t i = 0; i < x.v.size(); ++i) {
        grad->data[i * 3 + c] = g1.v[i] + 2 * x.v[i] * g2.v[i] + y.v[i] * g12.v[i];
      }
    }
  }
  return total / count;
}

}  // namespace

void LossConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) fail(ErrorKind::InvalidParameter, "lambda must be in [0,1]");
  if (ssim_window < 3 || ssim_window % 2 == 0) {
    fail(ErrorKind::InvalidParameter, "SSIM window must be odd and >= 3");
  }
  if (!(ssim_sigma > 0.0)) fail(ErrorKind::InvalidParameter, "SSIM sigma must be > 0");
}

LossValue l1_loss(const Image& rendered, const Image& target) {
  check_pair(rendered, target);
  LossValue out{0.0, Image(rendered.width, rendered.height)};
  const double inv = rendered.size() ? 1.0 / static_cast<double>(rendered.size()) : 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < rendered.size(); ++i) {
    const double d = rendered.data[i] - target.data[i];
    sum += std::abs(d);
    out.grad.data[i] = d > 0 ? inv : (d < 0 ? -inv : 0.0);
  }
  out.value = sum * inv;
  return out;
}

LossValue dssim_loss(const Image& rendered, const Image& target, const LossConfig& cfg) {
  LossValue out;
  const double s = ssim_impl(rendered, target, cfg, &out.grad);
  out.value = (1.0 - s) / 2.0;
  for (double& g : out.grad.data) g *= -0.5;
  return out;
}

LossValue training_loss(const Image& rendered, const Image& target, const LossConfig& cfg) {
  cfg.validate();
  if (cfg.lambda == 0.0) return l1_loss(rendered, target);
  if (cfg.lambda == 1.0) return dssim_loss(rendered, target, cfg);
  const LossValue l1 = l1_loss(rendered, target);
  const LossValue ds = dssim_loss(rendered, target, cfg);
  LossValue out{(1.0 - cfg.lambda) * l1.value + cfg.lambda * ds.value,
                Image(rendered.width, rendered.height)};
  for (std::size_t i = 0; i < out.grad.size(); ++i) {
    out.grad.data[i] = (1.0 - cfg.lambda) * l1.grad.data[i] + cfg.lambda * ds.grad.data[i];
  }
  return out;
}

double ssim(const Image& a, const Image& b, const LossConfig& cfg) {
  return ssim_impl(a, b, cfg, nullptr);
}

double psnr(const Image& a, const Image& b) {
  check_pair(a, b);
  if (a.size() == 0) fail(ErrorKind::InvalidParameter, "psnr of empty images");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

std::uint64_t model_size_bytes(std::size_t count) {
  return ply_header(count).size() + static_cast<std::uint64_t>(count) * kPlyBytesPerGaussian;
}

std::uint64_t model_size_bytes(const GaussianSet& gaussians) {
  return model_size_bytes(gaussians.count());
}

double compression_ratio(double baseline_bytes, double pruned_bytes) {
  if (!(baseline_bytes > 0.0) || !(pruned_bytes > 0.0)) {
    fail(ErrorKind::InvalidParameter, "compression ratio needs positive sizes");
  }
  return baseline_bytes / pruned_bytes;
}

}  // namespace splatprune
