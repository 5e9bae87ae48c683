#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "splatprune/scene.hpp"

namespace splatprune {

inline constexpr int kPlyPropertiesPerGaussian = 62;  // 59 parameters + 3 unused normals
inline constexpr std::uint64_t kPlyBytesPerGaussian = kPlyPropertiesPerGaussian * 4;

/// Property names in file order: x y z nx ny nz f_dc_0..2 f_rest_0..44
/// opacity scale_0..2 rot_0..3.
const std::vector<std::string>& ply_property_names();

/// Exact ASCII header written for a scene of `count` Gaussians.
std::string ply_header(std::size_t count);

std::vector<std::uint8_t> encode_ply(const GaussianSet& gaussians);

struct PlyReadOptions {
  bool normalize_rotations = true;
};

GaussianSet decode_ply(std::span<const std::uint8_t> bytes, const PlyReadOptions& opts = {});

void write_ply(const GaussianSet& gaussians, const std::filesystem::path& path);
GaussianSet read_ply(const std::filesystem::path& path, const PlyReadOptions& opts = {});

}  // namespace splatprune
