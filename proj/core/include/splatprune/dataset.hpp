#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "splatprune/image.hpp"
#include "splatprune/scene.hpp"

namespace splatprune {

/// One line of a dataset manifest:
///   image_path width height fx fy cx cy m00 .. m33 train|test
/// Paths are relative to the manifest's directory. `#` starts a comment.
struct ManifestEntry {
  std::string image_path;
  int width = 0;
  int height = 0;
  double fx = 0, fy = 0, cx = 0, cy = 0;
  std::array<double, 16> world_to_camera{};
  bool test = false;

  Camera camera() const;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
};

DatasetManifest parse_manifest(std::istream& in);
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, std::ostream& out);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

struct View {
  std::string name;
  Camera camera;
  Image image;
  bool test = false;
};

enum class Split { All, Train, Test };

/// Loads cameras and decodes images of the selected split, in manifest
/// order. Entries outside the split are never opened.
std::vector<View> load_dataset(const std::filesystem::path& manifest_path,
                               Split split = Split::All);

std::vector<View> select_split(const std::vector<View>& views, Split split);

/// Binary PPM (P6, maxval 255). Values are mapped to [0,1].
Image read_ppm(const std::filesystem::path& path);
/// Values are clamped to [0,1] and rounded to 8 bits.
void write_ppm(const Image& image, const std::filesystem::path& path);

}  // namespace splatprune
