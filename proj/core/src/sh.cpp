#include "splatprune/sh.hpp"

#include <algorithm>
#include <cmath>

#include "splatprune/error.hpp"

namespace splatprune {
namespace {

constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                           -1.0925484305920792, 0.5462742152960396};
constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                           0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                           -0.5900435899266435};

}  // namespace

ShBasis sh_basis(const Vec3d& dir) {
  const double x = dir[0], y = dir[1], z = dir[2];
  const double xx = x * x, yy = y * y, zz = z * z;
  return {kShC0,
          -kC1 * y,
          kC1 * z,
          -kC1 * x,
          kC2[0] * x * y,
          kC2[1] * y * z,
          kC2[2] * (2 * zz - xx - yy),
          kC2[3] * x * z,
          kC2[4] * (xx - yy),
          kC3[0] * y * (3 * xx - yy),
          kC3[1] * x * y * z,
          kC3[2] * y * (4 * zz - xx - yy),
          kC3[3] * z * (2 * zz - 3 * xx - 3 * yy),
          kC3[4] * x * (4 * zz - xx - yy),
          kC3[5] * z * (xx - yy),
          kC3[6] * x * (xx - 3 * yy)};
}

void sh_basis_with_gradient(const Vec3d& dir, ShBasis& basis,
                            std::array<Vec3d, kShBases>& grad) {
  const double x = dir[0], y = dir[1], z = dir[2];
  const double xx = x * x, yy = y * y, zz = z * z;
  basis = sh_basis(dir);
  grad[0] = {0, 0, 0};
  grad[1] = {0, -kC1, 0};
  grad[2] = {0, 0, kC1};
  grad[3] = {-kC1, 0, 0};
  grad[4] = {kC2[0] * y, kC2[0] * x, 0};
  grad[5] = {0, kC2[1] * z, kC2[1] * y};
  grad[6] = {-2 * kC2[2] * x, -2 * kC2[2] * y, 4 * kC2[2] * z};
  grad[7] = {kC2[3] * z, 0, kC2[3] * x};
  grad[8] = {2 * kC2[4] * x, -2 * kC2[4] * y, 0};
  grad[9] = {kC3[0] * 6 * x * y, kC3[0] * (3 * xx - 3 * yy), 0};
  grad[10] = {kC3[1] * y * z, kC3[1] * x * z, kC3[1] * x * y};
  grad[11] = {-2 * kC3[2] * x * y, kC3[2] * (4 * zz - xx - 3 * yy), 8 * kC3[2] * y * z};
  grad[12] = {-6 * kC3[3] * x * z, -6 * kC3[3] * y * z, kC3[3] * (6 * zz - 3 * xx - 3 * yy)};
  grad[13] = {kC3[4] * (4 * zz - 3 * xx - yy), -2 * kC3[4] * x * y, 8 * kC3[4] * x * z};
  grad[14] = {2 * kC3[5] * x * z, -2 * kC3[5] * y * z, kC3[5] * (xx - yy)};
  grad[15] = {kC3[6] * (3 * xx - 3 * yy), -6 * kC3[6] * x * y, 0};
}

Rgb sh_to_color(const ShCoeffs& coeffs, const Vec3d& view_dir) {
  const double n = std::sqrt(view_dir[0] * view_dir[0] + view_dir[1] * view_dir[1] +
                             view_dir[2] * view_dir[2]);
  if (!(std::abs(n - 1.0) <= 1e-6)) {
    fail(ErrorKind::InvalidParameter, "sh_to_color: view direction is not unit length");
  }
  const ShBasis basis = sh_basis(view_dir);
  Rgb rgb{};
  for (int c = 0; c < 3; ++c) {
    double v = 0.0;
    for (int k = 0; k < kShBases; ++k) v += basis[k] * coeffs[k * 3 + c];
    rgb[c] = std::max(v + 0.5, 0.0);
  }
  return rgb;
}

}  // namespace splatprune
