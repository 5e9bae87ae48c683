#pragma once

#include <array>

#include "splatprune/scene.hpp"

namespace splatprune {

inline constexpr double kShC0 = 0.28209479177387814;

using ShBasis = std::array<double, kShBases>;

/// Real SH basis up to degree 3 evaluated at a unit direction.
ShBasis sh_basis(const Vec3d& dir);

/// Basis values plus d(basis)/d(dir) for each of the 16 functions.
void sh_basis_with_gradient(const Vec3d& dir, ShBasis& basis,
                            std::array<Vec3d, kShBases>& grad);

/// View-dependent color: max(sum_k basis_k(dir) * coeffs_k + 0.5, 0) per
/// channel. `view_dir` must be unit length within 1e-6.
Rgb sh_to_color(const ShCoeffs& coeffs, const Vec3d& view_dir);

}  // namespace splatprune
