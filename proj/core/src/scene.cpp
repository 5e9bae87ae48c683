#include "splatprune/scene.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "splatprune/error.hpp"

namespace splatprune {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid parameter";
    case ErrorKind::InvalidState: return "invalid state";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::MalformedHeader: return "malformed header";
    case ErrorKind::SchemaMismatch: return "schema mismatch";
    case ErrorKind::TruncatedBody: return "truncated body";
    case ErrorKind::DatasetEmpty: return "dataset empty";
    case ErrorKind::DimensionMismatch: return "dimension mismatch";
    case ErrorKind::EmptyScene: return "empty scene";
    case ErrorKind::Diverged: return "diverged";
  }
  return "unknown";
}

ParamGroup param_group(int index) {
  if (index < param::kRotation) return ParamGroup::Position;
  if (index < param::kLogScale) return ParamGroup::Rotation;
  if (index < param::kOpacity) return ParamGroup::Scale;
  if (index < param::kShDc) return ParamGroup::Opacity;
  if (index < param::kShRest) return ParamGroup::ShDc;
  return ParamGroup::ShRest;
}

const char* param_name(int index) {
  static const auto names = [] {
    std::array<std::string, kParamsPerGaussian> n;
    n[0] = "x"; n[1] = "y"; n[2] = "z";
    for (int k = 0; k < 4; ++k) n[3 + k] = "rot_" + std::to_string(k);
    for (int k = 0; k < 3; ++k) n[7 + k] = "scale_" + std::to_string(k);
    n[10] = "opacity";
    for (int k = 0; k < kShFloats; ++k) n[11 + k] = "sh_" + std::to_string(k);
    return n;
  }();
  return names.at(static_cast<std::size_t>(index)).c_str();
}

void GaussianSet::resize(std::size_t n) {
  positions.resize(n);
  rotations.resize(n, Quatf{1, 0, 0, 0});
  log_scales.resize(n);
  opacity_logits.resize(n);
  sh_coeffs.resize(n);
}

void GaussianSet::reserve(std::size_t n) {
  positions.reserve(n);
  rotations.reserve(n);
  log_scales.reserve(n);
  opacity_logits.reserve(n);
  sh_coeffs.reserve(n);
}

void GaussianSet::push_row(const GaussianSet& src, std::size_t i) {
  positions.push_back(src.positions[i]);
  rotations.push_back(src.rotations[i]);
  log_scales.push_back(src.log_scales[i]);
  opacity_logits.push_back(src.opacity_logits[i]);
  sh_coeffs.push_back(src.sh_coeffs[i]);
}

void GaussianSet::validate() const {
  const auto n = count();
  if (rotations.size() != n || log_scales.size() != n ||
      opacity_logits.size() != n || sh_coeffs.size() != n) {
    fail(ErrorKind::InvalidParameter, "GaussianSet arrays differ in length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (int p = 0; p < kParamsPerGaussian; ++p) {
      if (!std::isfinite(param(i, p))) {
        fail(ErrorKind::InvalidParameter,
             "non-finite parameter " + std::string(param_name(p)) +
                 " on Gaussian " + std::to_string(i));
      }
    }
  }
}

void GaussianSet::normalize_rotations() {
  for (auto& q : rotations) {
    const double n2 = double(q[0]) * q[0] + double(q[1]) * q[1] +
                      double(q[2]) * q[2] + double(q[3]) * q[3];
    const double n = std::sqrt(n2);
    if (std::abs(n - 1.0) <= 1e-6) continue;
    if (!(n > 0.0) || !std::isfinite(n)) {
      q = Quatf{1, 0, 0, 0};
      continue;
    }
    for (auto& c : q) c = static_cast<float>(c / n);
  }
}

float& GaussianSet::param(std::size_t i, int p) {
  if (p < param::kRotation) return positions[i][p];
  if (p < param::kLogScale) return rotations[i][p - param::kRotation];
  if (p < param::kOpacity) return log_scales[i][p - param::kLogScale];
  if (p == param::kOpacity) return opacity_logits[i];
  return sh_coeffs[i][p - param::kShDc];
}

float GaussianSet::param(std::size_t i, int p) const {
  return const_cast<GaussianSet*>(this)->param(i, p);
}

namespace {
template <typename T>
bool same_bytes(const std::vector<T>& a, const std::vector<T>& b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0);
}
}  // namespace

bool bitwise_equal(const GaussianSet& a, const GaussianSet& b) {
  return same_bytes(a.positions, b.positions) && same_bytes(a.rotations, b.rotations) &&
         same_bytes(a.log_scales, b.log_scales) &&
         same_bytes(a.opacity_logits, b.opacity_logits) &&
         same_bytes(a.sh_coeffs, b.sh_coeffs);
}

void Camera::validate() const {
  if (width < 1 || height < 1) fail(ErrorKind::InvalidParameter, "camera size must be >= 1");
  if (!(fx > 0.0) || !(fy > 0.0)) fail(ErrorKind::InvalidParameter, "camera focal must be > 0");
  if (!(near_clip > 0.0)) fail(ErrorKind::InvalidParameter, "camera near_clip must be > 0");
  for (double v : world_to_camera) {
    if (!std::isfinite(v)) fail(ErrorKind::InvalidParameter, "camera transform not finite");
  }
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += rot(a, k) * rot(b, k);
      if (std::abs(dot - (a == b ? 1.0 : 0.0)) > 1e-6) {
        fail(ErrorKind::InvalidParameter, "camera rotation is not orthonormal");
      }
    }
  }
}

Vec3d Camera::position() const {
  // -R^T t
  Vec3d c{};
  for (int k = 0; k < 3; ++k) {
    c[k] = -(rot(0, k) * trans(0) + rot(1, k) * trans(1) + rot(2, k) * trans(2));
  }
  return c;
}

Camera Camera::look_at(const Vec3d& eye, const Vec3d& target, const Vec3d& up,
                       double focal, int width, int height) {
  auto sub = [](const Vec3d& a, const Vec3d& b) { return Vec3d{a[0] - b[0], a[1] - b[1], a[2] - b[2]}; };
  auto cross = [](const Vec3d& a, const Vec3d& b) {
    return Vec3d{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
  };
  auto unit = [](Vec3d v) {
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (!(n > 0.0)) fail(ErrorKind::InvalidParameter, "look_at: degenerate direction");
    for (auto& c : v) c /= n;
    return v;
  };
  // Rows of R are the camera axes in world coordinates: x right, y down, z forward.
  const Vec3d forward = unit(sub(target, eye));
  const Vec3d right = unit(cross(forward, up));
  const Vec3d down = cross(forward, right);

  Camera cam;
  const std::array<Vec3d, 3> rows{right, down, forward};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) cam.world_to_camera[r * 4 + c] = rows[r][c];
    cam.world_to_camera[r * 4 + 3] =
        -(rows[r][0] * eye[0] + rows[r][1] * eye[1] + rows[r][2] * eye[2]);
  }
  cam.world_to_camera[12] = 0;
  cam.world_to_camera[13] = 0;
  cam.world_to_camera[14] = 0;
  cam.world_to_camera[15] = 1;
  cam.fx = cam.fy = focal;
  cam.cx = 0.5 * (width - 1);
  cam.cy = 0.5 * (height - 1);
  cam.width = width;
  cam.height = height;
  return cam;
}

std::array<double, 9> rotation_matrix(const Quatd& q) {
  const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  const double r = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
  return {1 - 2 * (y * y + z * z), 2 * (x * y - r * z),     2 * (x * z + r * y),
          2 * (x * y + r * z),     1 - 2 * (x * x + z * z), 2 * (y * z - r * x),
          2 * (x * z - r * y),     2 * (y * z + r * x),     1 - 2 * (x * x + y * y)};
}

Covariance3 covariance_from_rotation_scale(const Quatd& q, const Vec3d& log_scale) {
  for (double v : q) {
    if (!std::isfinite(v)) fail(ErrorKind::InvalidParameter, "quaternion not finite");
  }
  for (double v : log_scale) {
    if (!std::isfinite(v)) fail(ErrorKind::InvalidParameter, "log-scale not finite");
  }
  const double n2 = q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3];
  if (!(n2 > 0.0)) fail(ErrorKind::InvalidParameter, "zero quaternion");

  const auto rm = rotation_matrix(q);
  const Vec3d s{std::exp(log_scale[0]), std::exp(log_scale[1]), std::exp(log_scale[2])};
  // M = R S; Sigma = M M^T
  std::array<double, 9> m{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m[r * 3 + c] = rm[r * 3 + c] * s[c];
  Covariance3 cov;
  for (int r = 0; r < 3; ++r) {
    for (int c = r; c < 3; ++c) {
      double v = 0.0;
      for (int k = 0; k < 3; ++k) v += m[r * 3 + k] * m[c * 3 + k];
      cov.m[r * 3 + c] = v;
      cov.m[c * 3 + r] = v;
    }
  }
  return cov;
}

double activated_opacity(double logit) { return 1.0 / (1.0 + std::exp(-logit)); }

double opacity_logit(double opacity) { return std::log(opacity / (1.0 - opacity)); }

}  // namespace splatprune
