#include "doctest.h"

#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "splatprune/dataset.hpp"
#include "splatprune/error.hpp"
#include "splatprune/loss.hpp"
#include "splatprune/ply.hpp"
#include "splatprune/renderer.hpp"
#include "splatprune/synthetic.hpp"
#include "support.hpp"

using namespace splatprune;
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

GaussianSet unit_quat_scene(std::uint64_t seed, int n) {
  GaussianSet g = testing::random_scene(seed, n);
  g.normalize_rotations();
  return g;
}

// Header text with one property line removed.
std::string header_without(const std::string& name, std::size_t count) {
  std::string h = ply_header(count);
  const std::string line = "property float " + name + "\n";
  h.erase(h.find(line), line.size());
  return h;
}

template <typename Fn>
ErrorKind kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::InvalidState;
}

}  // namespace

TEST_CASE("ply header layout") {
  const auto& names = ply_property_names();
  REQUIRE(names.size() == 62);
  CHECK(names[0] == "x");
  CHECK(names[3] == "nx");
  CHECK(names[6] == "f_dc_0");
  CHECK(names[9] == "f_rest_0");
  CHECK(names[53] == "f_rest_44");
  CHECK(names[54] == "opacity");
  CHECK(names[55] == "scale_0");
  CHECK(names[61] == "rot_3");
  CHECK(ply_header(7).rfind("ply\nformat binary_little_endian 1.0\nelement vertex 7\n", 0) == 0);
}

TEST_CASE("ply round trip is bitwise") {
  const GaussianSet g = unit_quat_scene(5, 25);
  const auto bytes = encode_ply(g);
  CHECK(bytes.size() == ply_header(25).size() + 25 * 248);
  CHECK(bytes.size() == model_size_bytes(g));
  const GaussianSet back = decode_ply(bytes);
  CHECK(bitwise_equal(g, back));
  CHECK(encode_ply(back) == bytes);
}

TEST_CASE("raw quaternions survive passthrough") {
  const GaussianSet g = testing::random_scene(6, 4);  // unnormalized rotations
  const auto bytes = encode_ply(g);
  PlyReadOptions raw;
  raw.normalize_rotations = false;
  CHECK(encode_ply(decode_ply(bytes, raw)) == bytes);
  const GaussianSet norm = decode_ply(bytes);
  for (const auto& q : norm.rotations) {
    CHECK(std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]) ==
          doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("one gaussian body is 248 bytes and fields land in order") {
  GaussianSet g;
  testing::add_gaussian(g, {1.5f, -2.0f, 3.25f}, -1.0f, 0.5, {0.2, 0.4, 0.6});
  const auto bytes = encode_ply(g);
  const std::size_t header = ply_header(1).size();
  REQUIRE(bytes.size() - header == 248);
  auto field = [&](int k) {
    float v;
    std::memcpy(&v, bytes.data() + header + 4 * k, 4);
    return v;
  };
  CHECK(field(0) == 1.5f);
  CHECK(field(2) == 3.25f);
  CHECK(field(3) == 0.0f);
  CHECK(field(54) == g.opacity_logits[0]);
  CHECK(field(55) == -1.0f);
  CHECK(field(58) == 1.0f);
}

TEST_CASE("f_rest is stored channel-major") {
  GaussianSet g = unit_quat_scene(1, 1);
  g.sh_coeffs[0].fill(0.0f);
  g.sh_coeffs[0][1 * 3 + 2] = 7.0f;  // basis 1, blue
  const auto bytes = encode_ply(g);
  const std::size_t header = ply_header(1).size();
  float v;
  std::memcpy(&v, bytes.data() + header + 4 * (9 + 2 * 15 + 0), 4);
  CHECK(v == 7.0f);
}

TEST_CASE("empty scene files") {
  const auto dir = testing::scratch_dir("ply_empty");
  write_ply({}, dir / "e.ply");
  CHECK(fs::file_size(dir / "e.ply") == ply_header(0).size());
  CHECK(read_ply(dir / "e.ply").count() == 0);
}

TEST_CASE("write read write is byte identical") {
  const auto dir = testing::scratch_dir("ply_idem");
  write_ply(testing::random_scene(9, 40), dir / "a.ply");
  write_ply(read_ply(dir / "a.ply", {false}), dir / "b.ply");
  CHECK(slurp(dir / "a.ply") == slurp(dir / "b.ply"));

  write_ply(unit_quat_scene(9, 40), dir / "c.ply");
  write_ply(read_ply(dir / "c.ply"), dir / "d.ply");
  CHECK(slurp(dir / "c.ply") == slurp(dir / "d.ply"));
}

TEST_CASE("malformed ply files are reported, not crashed on") {
  const GaussianSet g = unit_quat_scene(2, 3);
  const auto good = encode_ply(g);
  const std::string body(good.begin() + ply_header(3).size(), good.end());
  auto bytes = [](const std::string& s) { return std::vector<std::uint8_t>(s.begin(), s.end()); };

  SUBCASE("61 properties names the missing one") {
    const auto b = bytes(header_without("rot_3", 3) + body);
    try {
      decode_ply(b);
      FAIL("expected a schema error");
    } catch (const PlyError& e) {
      CHECK(e.kind() == ErrorKind::SchemaMismatch);
      CHECK(std::string(e.what()).find("rot_3") != std::string::npos);
      CHECK(e.offset() > 0);
    }
    const auto mid = bytes(header_without("f_rest_7", 3) + body);
    try {
      decode_ply(mid);
      FAIL("expected a schema error");
    } catch (const PlyError& e) {
      CHECK(std::string(e.what()).find("f_rest_7") != std::string::npos);
    }
  }
  SUBCASE("extra property") {
    std::string h = ply_header(3);
    h.insert(h.find("end_header"), "property float extra\n");
    CHECK(kind_of([&] { decode_ply(bytes(h + body)); }) == ErrorKind::SchemaMismatch);
  }
  SUBCASE("truncated body") {
    auto b = good;
    b.resize(b.size() - 5);
    try {
      decode_ply(b);
      FAIL("expected truncation");
    } catch (const PlyError& e) {
      CHECK(e.kind() == ErrorKind::TruncatedBody);
    }
  }
  SUBCASE("bad magic, format and count") {
    CHECK(kind_of([&] { decode_ply(bytes("plx\n" + body)); }) == ErrorKind::MalformedHeader);
    std::string ascii = ply_header(3);
    ascii.replace(ascii.find("binary_little_endian"), 20, "ascii");
    CHECK(kind_of([&] { decode_ply(bytes(ascii + body)); }) == ErrorKind::MalformedHeader);
    std::string neg = ply_header(3);
    neg.replace(neg.find("vertex 3"), 8, "vertex -3");
    CHECK(kind_of([&] { decode_ply(bytes(neg + body)); }) == ErrorKind::MalformedHeader);
    CHECK(kind_of([&] { decode_ply(bytes("")); }) == ErrorKind::MalformedHeader);
    CHECK(kind_of([&] { decode_ply(bytes("ply\nformat binary_little_endian 1.0\n")); }) ==
          ErrorKind::MalformedHeader);
  }
  SUBCASE("comments are skipped") {
    std::string h = ply_header(3);
    h.insert(h.find("element"), "comment made elsewhere\n");
    CHECK(bitwise_equal(decode_ply(bytes(h + body)), g));
  }
  SUBCASE("random garbage never crashes") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 200; ++trial) {
      auto b = good;
      std::uniform_int_distribution<std::size_t> pos(0, ply_header(3).size() - 1);
      b[pos(rng)] = static_cast<std::uint8_t>(rng());
      try {
        decode_ply(b);
      } catch (const Error&) {
      }
    }
  }
}

TEST_CASE("ppm round trip") {
  const auto dir = testing::scratch_dir("ppm");
  Image img = testing::random_image(3, 7, 5);
  img.data[0] = 1.7;
  img.data[1] = -0.2;
  write_ppm(img, dir / "a.ppm");
  CHECK(fs::file_size(dir / "a.ppm") == std::string("P6\n7 5\n255\n").size() + 7 * 5 * 3);
  const Image back = read_ppm(dir / "a.ppm");
  CHECK(back.width == 7);
  CHECK(back.height == 5);
  CHECK(back.data[0] == 1.0);
  CHECK(back.data[1] == 0.0);
  CHECK(back.data[10] == quantize_8bit(img).data[10]);
  CHECK(kind_of([&] { read_ppm(dir / "missing.ppm"); }) == ErrorKind::Io);
}

TEST_CASE("manifest parsing") {
  std::istringstream in(
      "# comment\n"
      "a.ppm 4 3 10 11 1.5 1 1 0 0 0 0 1 0 0 0 0 1 2 0 0 0 1 train\n"
      "\n"
      "b.ppm 4 3 10 11 1.5 1 1 0 0 0 0 1 0 0 0 0 1 2 0 0 0 1 test  # trailing\n");
  const DatasetManifest m = parse_manifest(in);
  REQUIRE(m.entries.size() == 2);
  CHECK(m.entries[0].image_path == "a.ppm");
  CHECK_FALSE(m.entries[0].test);
  CHECK(m.entries[1].test);
  CHECK(m.entries[0].camera().trans(2) == 2.0);
  CHECK(m.entries[0].camera().fy == 11.0);

  std::ostringstream out;
  write_manifest(m, out);
  std::istringstream again(out.str());
  const DatasetManifest m2 = parse_manifest(again);
  CHECK(m2.entries.size() == 2);
  CHECK(m2.entries[1].world_to_camera == m.entries[1].world_to_camera);

  std::istringstream shortline("a.ppm 4 3 10 train\n");
  CHECK_THROWS_AS(parse_manifest(shortline), Error);
  std::istringstream badflag("a.ppm 4 3 10 11 1.5 1 1 0 0 0 0 1 0 0 0 0 1 2 0 0 0 1 val\n");
  CHECK_THROWS_AS(parse_manifest(badflag), Error);
}

TEST_CASE("dataset loading") {
  const auto dir = testing::scratch_dir("dataset");
  {
    std::ofstream(dir / "empty.txt") << "# nothing here\n";
  }
  try {
    load_dataset(dir / "empty.txt");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DatasetEmpty);
    CHECK(std::string(e.what()) == "dataset empty");
  }

  write_ppm(Image(64, 64, 0.25), dir / "one.ppm");
  DatasetManifest m;
  ManifestEntry e;
  e.image_path = "one.ppm";
  e.width = e.height = 64;
  e.fx = e.fy = 50;
  e.cx = e.cy = 31.5;
  e.world_to_camera = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 2, 0, 0, 0, 1};
  m.entries.push_back(e);
  write_manifest(m, dir / "one.txt");
  const auto views = load_dataset(dir / "one.txt");
  REQUIRE(views.size() == 1);
  CHECK(views[0].image.width == 64);
  CHECK(views[0].image.height == 64);
  CHECK(views[0].image.data[0] == doctest::Approx(64 / 255.0));

  // The test entry points at a file that does not exist: loading only the
  // train split must never touch it.
  ManifestEntry t = e;
  t.image_path = "absent.ppm";
  t.test = true;
  m.entries.push_back(t);
  write_manifest(m, dir / "split.txt");
  CHECK(load_dataset(dir / "split.txt", Split::Train).size() == 1);
  CHECK(kind_of([&] { load_dataset(dir / "split.txt", Split::Test); }) == ErrorKind::Io);
  CHECK(kind_of([&] { load_dataset(dir / "split.txt"); }) == ErrorKind::Io);

  DatasetManifest wrong;
  e.width = 32;
  wrong.entries.push_back(e);
  write_manifest(wrong, dir / "wrong.txt");
  CHECK(kind_of([&] { load_dataset(dir / "wrong.txt"); }) == ErrorKind::DimensionMismatch);
  CHECK(kind_of([&] { load_dataset(dir / "none.txt"); }) == ErrorKind::Io);
}

TEST_CASE("synthetic scenes") {
  SyntheticConfig sc;
  sc.n_gaussians = 300;
  const SyntheticScene a = make_synthetic(sc);
  const SyntheticScene b = make_synthetic(sc);
  CHECK(a.scene.count() == 300);
  CHECK(bitwise_equal(a.scene, b.scene));
  REQUIRE(a.views.size() == 8);
  for (std::size_t k = 0; k < a.views.size(); ++k) {
    CHECK(a.views[k].image.width == 64);
    CHECK(a.views[k].image.height == 64);
    CHECK(testing::same_bits(a.views[k].image, b.views[k].image));
    CHECK(a.views[k].test == (k % 4 == 3));
  }
  for (const auto& p : a.scene.positions)
    for (float c : p) CHECK(std::abs(c) <= 0.5f);

  sc.seed = 1;
  CHECK_FALSE(bitwise_equal(make_synthetic(sc).scene, a.scene));
  sc.n_views = 5;
  CHECK(make_synthetic(sc).views.size() == 5);
  sc.n_views = 1;
  CHECK_THROWS_AS(make_synthetic(sc), Error);
}

TEST_CASE("saved synthetic data re-renders exactly") {
  SyntheticConfig sc;
  sc.n_gaussians = 200;
  sc.n_views = 4;
  sc.image_size = 32;
  const SyntheticScene s = make_synthetic(sc);
  const auto dir = testing::scratch_dir("synth");
  save_synthetic(s, dir);
  CHECK(fs::exists(dir / "scene.ply"));
  const GaussianSet scene = read_ply(dir / "scene.ply");
  const auto views = load_dataset(dir / "manifest.txt");
  REQUIRE(views.size() == 4);
  for (std::size_t k = 0; k < views.size(); ++k) {
    const Image render = rasterize(scene, views[k].camera, sc.background).image;
    CHECK(std::isinf(psnr(render, s.views[k].image)));
    CHECK(quantize_8bit(render).data == views[k].image.data);
  }
}
