#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "scanflow/scan_io.hpp"

using namespace scanflow;

TEST_CASE("P2 values are normalized and flipped so row 0 is the bottom") {
  const GrayscaleGrid g = parse_pgm("P2\n2 2\n255\n0 255\n255 0\n");
  CHECK(g.dims == std::array<int, 2>{2, 2});
  // file order (0,255,255,0), top row first
  CHECK(g.at(0, 1) == 0.0);
  CHECK(g.at(1, 1) == 1.0);
  CHECK(g.at(0, 0) == 1.0);
  CHECK(g.at(1, 0) == 0.0);
  CHECK(g.spacing == Vec<2>{1.0, 1.0});
}

TEST_CASE("comments and odd whitespace in the header") {
  const GrayscaleGrid g = parse_pgm("P2 # magic\n# full line\n3\t1 # dims\n7\n0 7 3\n");
  CHECK(g.dims == std::array<int, 2>{3, 1});
  CHECK(g.maxval == 7);
  CHECK(g.at(2, 0) == doctest::Approx(3.0 / 7.0));
}

TEST_CASE("P2 and P5 encodings give the same grid") {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> d(0, 255);
  const int w = 7, h = 5;
  std::vector<double> v(w * h);
  for (auto& x : v) x = d(rng) / 255.0;
  const GrayscaleGrid g = GrayscaleGrid::from_values({w, h}, v);
  const GrayscaleGrid a = parse_pgm(format_pgm(g, false));
  const GrayscaleGrid b = parse_pgm(format_pgm(g, true));
  CHECK(a.dims == b.dims);
  CHECK(a.values == b.values);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(a.values[i] == doctest::Approx(v[i]).epsilon(1e-12));

  SUBCASE("16-bit P5") {
    const GrayscaleGrid c = parse_pgm(std::string("P5\n2 1\n1000\n") + std::string("\x00\x0a\x03\xe8", 4));
    CHECK(c.at(0, 0) == doctest::Approx(0.01));
    CHECK(c.at(1, 0) == 1.0);
  }
}

TEST_CASE("malformed headers report the byte offset") {
  auto offset_of = [](std::string_view s) -> std::optional<std::size_t> {
    try {
      parse_pgm(s);
    } catch (const ScanError& e) {
      return e.offset();
    }
    return std::nullopt;
  };
  CHECK(offset_of("P3\n1 1\n255\n0\n") == std::optional<std::size_t>(0));
  CHECK(offset_of("P2\n1 x\n255\n0\n") == std::optional<std::size_t>(5));
  CHECK(offset_of("P2\n1 1\n70000\n0\n").has_value());
}

TEST_CASE("truncated payload is a size mismatch") {
  CHECK_THROWS_WITH_AS(parse_pgm("P2\n2 2\n255\n0 1 2\n"), doctest::Contains("size mismatch"), ScanError);
  CHECK_THROWS_WITH_AS(parse_pgm(std::string("P5\n2 2\n255\n") + std::string(3, '\x01')),
                       doctest::Contains("size mismatch"), ScanError);
}

TEST_CASE("sidecar spacing is carried through") {
  const auto dir = std::filesystem::temp_directory_path() / "scanflow_scan_io";
  std::filesystem::create_directories(dir);
  std::vector<double> v(85 * 70, 0.25);
  write_pgm(GrayscaleGrid::from_values({85, 70}, v), dir / "slice.pgm");
  {
    std::ofstream s(dir / "slice.ini");
    s << "[scan]\nspacing_x = 0.3\nspacing_y = 0.3\n";
  }
  GrayscaleGrid g = load_pgm(dir / "slice.pgm");
  apply_metadata(g, load_sidecar(dir / "slice.ini"));
  CHECK(g.dims == std::array<int, 2>{85, 70});
  CHECK(g.spacing == Vec<2>{0.3, 0.3});
  CHECK(g.box().hi[0] == doctest::Approx(25.5));
  CHECK(g.box().hi[1] == doctest::Approx(21.0));

  std::ofstream(dir / "bad.ini") << "[scan]\nspacing_z = 1\n";
  CHECK_THROWS_AS(load_sidecar(dir / "bad.ini"), ScanError);
}

TEST_CASE("threshold") {
  SUBCASE("all zero") {
    const auto g = GrayscaleGrid::from_values({4, 4}, std::vector<double>(16, 0.0));
    CHECK(threshold(g, 0.5).count == 0);
  }
  SUBCASE("constant 0.6") {
    const auto g = GrayscaleGrid::from_values({4, 4}, std::vector<double>(16, 0.6));
    CHECK(threshold(g, 0.5).count == 16);
  }
  SUBCASE("disk of radius 10 voxels") {
    std::vector<double> v(32 * 32);
    std::size_t inside = 0;
    for (int j = 0; j < 32; ++j)
      for (int i = 0; i < 32; ++i) {
        const bool in = std::hypot(i + 0.5 - 16.0, j + 0.5 - 16.0) < 10.0;
        v[j * 32 + i] = in ? 1.0 : 0.0;
        inside += in;
      }
    const auto g = GrayscaleGrid::from_values({32, 32}, v);
    const VoxelDomain d = threshold(g, 0.5);
    CHECK(d.count == inside);
    for (std::size_t k = 0; k < v.size(); ++k) CHECK(bool(d.mask[k]) == (v[k] > 0.5));
  }
}
