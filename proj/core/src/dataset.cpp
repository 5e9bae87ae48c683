#include "splatprune/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "splatprune/error.hpp"

namespace splatprune {

Camera ManifestEntry::camera() const {
  Camera cam;
  cam.world_to_camera = world_to_camera;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = cx;
  cam.cy = cy;
  cam.width = width;
  cam.height = height;
  return cam;
}

DatasetManifest parse_manifest(std::istream& in) {
  DatasetManifest m;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    ManifestEntry e;
    if (!(fields >> e.image_path)) continue;  // blank or comment-only
    std::string flag;
    fields >> e.width >> e.height >> e.fx >> e.fy >> e.cx >> e.cy;
    for (double& v : e.world_to_camera) fields >> v;
    fields >> flag;
    std::string extra;
    if (!fields || (fields >> extra)) {
      fail(ErrorKind::InvalidParameter,
           "manifest line " + std::to_string(line_no) + ": expected 24 fields");
    }
    if (flag == "train") {
      e.test = false;
    } else if (flag == "test") {
      e.test = true;
    } else {
      fail(ErrorKind::InvalidParameter, "manifest line " + std::to_string(line_no) +
                                            ": split flag must be train or test");
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::Io, "cannot open manifest '" + path.string() + "'");
  return parse_manifest(f);
}

void write_manifest(const DatasetManifest& manifest, std::ostream& out) {
  out << "# image width height fx fy cx cy world_to_camera[16 row-major] split\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& e : manifest.entries) {
    out << e.image_path << ' ' << e.width << ' ' << e.height << ' ' << e.fx << ' ' << e.fy
        << ' ' << e.cx << ' ' << e.cy;
    for (double v : e.world_to_camera) out << ' ' << v;
    out << ' ' << (e.test ? "test" : "train") << '\n';
  }
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail(ErrorKind::Io, "cannot write manifest '" + path.string() + "'");
  write_manifest(manifest, f);
  if (!f) fail(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

std::vector<View> load_dataset(const std::filesystem::path& manifest_path, Split split) {
  const DatasetManifest m = read_manifest(manifest_path);
  if (m.entries.empty()) fail(ErrorKind::DatasetEmpty, "dataset empty");
  const auto base = manifest_path.parent_path();
  std::vector<View> views;
  for (const auto& e : m.entries) {
    if ((split == Split::Train && e.test) || (split == Split::Test && !e.test)) continue;
    View v;
    v.name = e.image_path;
    v.test = e.test;
    v.camera = e.camera();
    v.camera.validate();
    const auto path = base / e.image_path;
    if (!std::filesystem::exists(path)) {
      fail(ErrorKind::Io, "dataset image '" + path.string() + "' not found");
    }
    v.image = read_ppm(path);
    if (v.image.width != e.width || v.image.height != e.height) {
      fail(ErrorKind::DimensionMismatch,
           "image '" + e.image_path + "' is " + std::to_string(v.image.width) + "x" +
               std::to_string(v.image.height) + ", manifest declares " +
               std::to_string(e.width) + "x" + std::to_string(e.height));
    }
    views.push_back(std::move(v));
  }
  if (views.empty()) fail(ErrorKind::DatasetEmpty, "dataset empty for the requested split");
  return views;
}

std::vector<View> select_split(const std::vector<View>& views, Split split) {
  std::vector<View> out;
  for (const auto& v : views) {
    if (split == Split::All || (split == Split::Test) == v.test) out.push_back(v);
  }
  return out;
}

namespace {

// Reads the next whitespace/comment-delimited header token of a PPM.
std::string ppm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {}
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot open image '" + path.string() + "'");
  if (ppm_token(f) != "P6") fail(ErrorKind::Io, "'" + path.string() + "' is not a binary PPM");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(ppm_token(f));
    h = std::stoi(ppm_token(f));
    maxval = std::stoi(ppm_token(f));
  } catch (const std::exception&) {
    fail(ErrorKind::Io, "bad PPM header in '" + path.string() + "'");
  }
  if (w < 1 || h < 1 || maxval != 255) {
    fail(ErrorKind::Io, "unsupported PPM geometry/maxval in '" + path.string() + "'");
  }
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
  f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (f.gcount() != static_cast<std::streamsize>(raw.size())) {
    fail(ErrorKind::Io, "truncated PPM '" + path.string() + "'");
  }
  Image img(w, h);
  for (std::size_t i = 0; i < raw.size(); ++i) img.data[i] = raw[i] / 255.0;
  return img;
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::Io, "cannot write image '" + path.string() + "'");
  f << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<unsigned char> raw(image.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = static_cast<unsigned char>(std::lround(std::clamp(image.data[i], 0.0, 1.0) * 255.0));
  }
  f.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!f) fail(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

}  // namespace splatprune
