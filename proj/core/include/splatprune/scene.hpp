#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace splatprune {

using Vec3f = std::array<float, 3>;
using Quatf = std::array<float, 4>;  // (w, x, y, z)
using Vec3d = std::array<double, 3>;
using Quatd = std::array<double, 4>;
using Rgb = std::array<double, 3>;

inline constexpr int kShBases = 16;                    // degree 3
inline constexpr int kShFloats = kShBases * 3;         // 16 bases x RGB
inline constexpr int kParamsPerGaussian = 3 + 4 + 3 + 1 + kShFloats;  // 59

/// SH coefficients of one Gaussian, laid out basis-major: index = basis*3 + channel.
using ShCoeffs = std::array<float, kShFloats>;

/// Offsets of each attribute inside the flat 59-wide per-Gaussian parameter
/// vector used by gradients and the optimizer.
namespace param {
inline constexpr int kPosition = 0;
inline constexpr int kRotation = 3;
inline constexpr int kLogScale = 7;
inline constexpr int kOpacity = 10;
inline constexpr int kShDc = 11;
inline constexpr int kShRest = 14;
}  // namespace param

enum class ParamGroup { Position, Rotation, Scale, Opacity, ShDc, ShRest };

ParamGroup param_group(int index);
const char* param_name(int index);

/// Structure-of-arrays scene in storage space: opacity as logit, scales as
/// logs, rotations as quaternions.
struct GaussianSet {
  std::vector<Vec3f> positions;
  std::vector<Quatf> rotations;
  std::vector<Vec3f> log_scales;
  std::vector<float> opacity_logits;
  std::vector<ShCoeffs> sh_coeffs;

  std::size_t count() const noexcept { return positions.size(); }
  bool empty() const noexcept { return positions.empty(); }

  void resize(std::size_t n);
  void reserve(std::size_t n);

  /// Copies row `i` of `src` to the end of this set.
  void push_row(const GaussianSet& src, std::size_t i);

  /// Throws InvalidParameter when arrays disagree in length or hold
  /// non-finite values.
  void validate() const;

  /// Normalizes every quaternion whose norm is off by more than 1e-6.
  /// Quaternions already within tolerance are left bit-for-bit untouched.
  void normalize_rotations();

  float& param(std::size_t i, int p);
  float param(std::size_t i, int p) const;
};

/// True when every stored float of both sets is bit-identical.
bool bitwise_equal(const GaussianSet& a, const GaussianSet& b);

/// Pinhole camera. `world_to_camera` is row-major 4x4 with a rigid upper
/// 3x4 block; camera looks down +z, image y grows downward.
struct Camera {
  std::array<double, 16> world_to_camera{1, 0, 0, 0, 0, 1, 0, 0,
                                         0, 0, 1, 0, 0, 0, 0, 1};
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  double near_clip = 0.01;

  void validate() const;

  /// Camera centre in world coordinates.
  Vec3d position() const;

  double rot(int r, int c) const { return world_to_camera[r * 4 + c]; }
  double trans(int r) const { return world_to_camera[r * 4 + 3]; }

  static Camera look_at(const Vec3d& eye, const Vec3d& target, const Vec3d& up,
                        double focal, int width, int height);
};

/// Symmetric 3x3 covariance, row-major.
struct Covariance3 {
  std::array<double, 9> m{};
  double operator()(int r, int c) const { return m[r * 3 + c]; }
};

/// Rotation matrix (row-major) of q / |q|.
std::array<double, 9> rotation_matrix(const Quatd& q);

/// Sigma = R S S^T R^T with S = diag(exp(log_scale)).
Covariance3 covariance_from_rotation_scale(const Quatd& q, const Vec3d& log_scale);

/// logistic(logit)
double activated_opacity(double logit);

/// Inverse of activated_opacity.
double opacity_logit(double opacity);

}  // namespace splatprune
