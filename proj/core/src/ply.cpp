#include "splatprune/ply.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "splatprune/error.hpp"

namespace splatprune {
namespace {

// f_rest is stored channel-major (all 15 red coefficients first), the
// layout used by public splat checkpoints.
int rest_file_index(int basis, int channel) { return channel * (kShBases - 1) + (basis - 1); }

void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
}

float get_f32(const std::uint8_t* p) {
  const std::uint32_t bits = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
                             (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

/// Fills the 62 file-order values of Gaussian i.
void row_to_file(const GaussianSet& g, std::size_t i, float* row) {
  row[0] = g.positions[i][0];
  row[1] = g.positions[i][1];
  row[2] = g.positions[i][2];
  row[3] = row[4] = row[5] = 0.0f;
  const auto& sh = g.sh_coeffs[i];
  for (int c = 0; c < 3; ++c) row[6 + c] = sh[c];
  for (int k = 1; k < kShBases; ++k)
    for (int c = 0; c < 3; ++c) row[9 + rest_file_index(k, c)] = sh[k * 3 + c];
  row[54] = g.opacity_logits[i];
  for (int k = 0; k < 3; ++k) row[55 + k] = g.log_scales[i][k];
  for (int k = 0; k < 4; ++k) row[58 + k] = g.rotations[i][k];
}

void file_to_row(const float* row, GaussianSet& g, std::size_t i) {
  g.positions[i] = {row[0], row[1], row[2]};
  auto& sh = g.sh_coeffs[i];
  for (int c = 0; c < 3; ++c) sh[c] = row[6 + c];
  for (int k = 1; k < kShBases; ++k)
    for (int c = 0; c < 3; ++c) sh[k * 3 + c] = row[9 + rest_file_index(k, c)];
  g.opacity_logits[i] = row[54];
  g.log_scales[i] = {row[55], row[56], row[57]};
  g.rotations[i] = {row[58], row[59], row[60], row[61]};
}

/// Line-oriented cursor over the ASCII header.
class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool next(std::string& line) {
    line_start_ = pos_;
    if (pos_ >= bytes_.size()) return false;
    std::size_t end = pos_;
    while (end < bytes_.size() && bytes_[end] != '\n') ++end;
    if (end >= bytes_.size()) return false;
    line.assign(reinterpret_cast<const char*>(bytes_.data()) + pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos_ = end + 1;
    return true;
  }

  std::uint64_t line_offset() const { return line_start_; }
  std::size_t position() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::size_t line_start_ = 0;
};

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out{std::istream_iterator<std::string>(in),
                               std::istream_iterator<std::string>()};
  return out;
}

}  // namespace

const std::vector<std::string>& ply_property_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n{"x", "y", "z", "nx", "ny", "nz"};
    for (int k = 0; k < 3; ++k) n.push_back("f_dc_" + std::to_string(k));
    for (int k = 0; k < 45; ++k) n.push_back("f_rest_" + std::to_string(k));
    n.push_back("opacity");
    for (int k = 0; k < 3; ++k) n.push_back("scale_" + std::to_string(k));
    for (int k = 0; k < 4; ++k) n.push_back("rot_" + std::to_string(k));
    return n;
  }();
  return names;
}

std::string ply_header(std::size_t count) {
  std::string h = "ply\nformat binary_little_endian 1.0\nelement vertex " +
                  std::to_string(count) + "\n";
  for (const auto& name : ply_property_names()) h += "property float " + name + "\n";
  h += "end_header\n";
  return h;
}

std::vector<std::uint8_t> encode_ply(const GaussianSet& gaussians) {
  gaussians.validate();
  const std::string header = ply_header(gaussians.count());
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + gaussians.count() * kPlyBytesPerGaussian);
  float row[kPlyPropertiesPerGaussian];
  for (std::size_t i = 0; i < gaussians.count(); ++i) {
    row_to_file(gaussians, i, row);
    for (float v : row) put_f32(out, v);
  }
  return out;
}

GaussianSet decode_ply(std::span<const std::uint8_t> bytes, const PlyReadOptions& opts) {
  HeaderReader reader(bytes);
  std::string line;

  auto expect_line = [&](const char* what) {
    if (!reader.next(line)) {
      throw PlyError(ErrorKind::MalformedHeader, reader.line_offset(),
                     std::string("unexpected end of header, expected ") + what);
    }
  };
  // Skips comment/obj_info lines.
  auto next_meaningful = [&](const char* what) {
    do {
      expect_line(what);
    } while (line.rfind("comment", 0) == 0 || line.rfind("obj_info", 0) == 0);
  };

  expect_line("'ply'");
  if (line != "ply") throw PlyError(ErrorKind::MalformedHeader, 0, "missing 'ply' magic");

  next_meaningful("format line");
  if (line != "format binary_little_endian 1.0") {
    throw PlyError(ErrorKind::MalformedHeader, reader.line_offset(),
                   "unsupported format line '" + line + "'");
  }

  next_meaningful("element vertex");
  std::uint64_t count = 0;
  {
    const auto tok = split_ws(line);
    if (tok.size() != 3 || tok[0] != "element" || tok[1] != "vertex") {
      throw PlyError(ErrorKind::MalformedHeader, reader.line_offset(),
                     "expected 'element vertex <N>', got '" + line + "'");
    }
    try {
      std::size_t used = 0;
      count = std::stoull(tok[2], &used);
      if (used != tok[2].size() || tok[2][0] == '-') throw std::invalid_argument("count");
    } catch (const std::exception&) {
      throw PlyError(ErrorKind::MalformedHeader, reader.line_offset(),
                     "bad vertex count '" + tok[2] + "'");
    }
  }

  const auto& names = ply_property_names();
  std::size_t seen = 0;
  while (true) {
    next_meaningful("property or end_header");
    if (line == "end_header") break;
    const auto tok = split_ws(line);
    if (tok.size() >= 1 && tok[0] == "element") {
      throw PlyError(ErrorKind::SchemaMismatch, reader.line_offset(),
                     "unexpected extra element '" + line + "'");
    }
    if (tok.size() != 3 || tok[0] != "property") {
      throw PlyError(ErrorKind::MalformedHeader, reader.line_offset(),
                     "unparseable header line '" + line + "'");
    }
    if (seen >= names.size()) {
      throw PlyError(ErrorKind::SchemaMismatch, reader.line_offset(),
                     "unexpected extra property '" + tok[2] + "'");
    }
    if (tok[2] != names[seen]) {
      throw PlyError(ErrorKind::SchemaMismatch, reader.line_offset(),
                     "expected property '" + names[seen] + "', found '" + tok[2] + "'");
    }
    if (tok[1] != "float" && tok[1] != "float32") {
      throw PlyError(ErrorKind::SchemaMismatch, reader.line_offset(),
                     "property '" + tok[2] + "' must be float, found '" + tok[1] + "'");
    }
    ++seen;
  }
  if (seen != names.size()) {
    throw PlyError(ErrorKind::SchemaMismatch, reader.line_offset(),
                   "missing property '" + names[seen] + "' (header lists " +
                       std::to_string(seen) + " of " + std::to_string(names.size()) + ")");
  }

  const std::size_t body = reader.position();
  const std::uint64_t need = count * kPlyBytesPerGaussian;
  if (bytes.size() - body < need) {
    throw PlyError(ErrorKind::TruncatedBody, bytes.size(),
                   "body holds " + std::to_string(bytes.size() - body) + " bytes, expected " +
                       std::to_string(need));
  }
  if (bytes.size() - body > need) {
    throw PlyError(ErrorKind::MalformedHeader, body + need, "trailing bytes after vertex data");
  }

  GaussianSet g;
  g.resize(count);
  float row[kPlyPropertiesPerGaussian];
  const std::uint8_t* p = bytes.data() + body;
  for (std::size_t i = 0; i < count; ++i) {
    for (float& v : row) {
      v = get_f32(p);
      p += 4;
    }
    file_to_row(row, g, i);
  }
  if (opts.normalize_rotations) g.normalize_rotations();
  return g;
}

void write_ply(const GaussianSet& gaussians, const std::filesystem::path& path) {
  const auto bytes = encode_ply(gaussians);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) fail(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

GaussianSet read_ply(const std::filesystem::path& path, const PlyReadOptions& opts) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot open '" + path.string() + "'");
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(f),
                                        std::istreambuf_iterator<char>()};
  return decode_ply(bytes, opts);
}

}  // namespace splatprune
