#include <doctest.h>

#include <sstream>

#include "dualpf/rng.hpp"
#include "dualpf/terrain.hpp"

using namespace dualpf;

namespace {

TerrainMap small_map() {
  Eigen::MatrixXd h(3, 4);
  h << 0, 1, 2, 3,
       4, 5, 6, 7,
       8, 9, 10, 20;
  return TerrainMap({10.0, -5.0}, 2.0, h);
}

}  // namespace

TEST_CASE("heights at nodes and cell centers") {
  const TerrainMap m = small_map();
  CHECK(m.height({10.0, -5.0}) == 0.0);
  CHECK(m.height({16.0, -1.0}) == 20.0);
  CHECK(m.height({12.0, -3.0}) == 5.0);
  CHECK(m.height({15.0, -2.0}) == doctest::Approx((6.0 + 7.0 + 10.0 + 20.0) / 4.0));
  CHECK(m.upper_corner().isApprox(Eigen::Vector2d(16.0, -1.0)));
}

TEST_CASE("queries outside the footprint are clamped and flagged") {
  const TerrainMap m = small_map();
  bool clamped = false;
  CHECK(m.height({0.0, -5.0}, &clamped) == 0.0);
  CHECK(clamped);
  clamped = false;
  m.height({11.0, -4.0}, &clamped);
  CHECK_FALSE(clamped);
  CHECK_FALSE(m.contains({30.0, 0.0}));
}

TEST_CASE("ramp gradient agrees with finite differences") {
  TerrainFootprint fp;
  const TerrainMap m = make_ramp_terrain(fp, {1.0, 0.0});
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector2d p(-490.0 + 980.0 * uniform01(rng), -490.0 + 980.0 * uniform01(rng));
    const Eigen::Vector2d g = m.gradient(p);
    const double h = 1e-4;
    const double fx = (m.height(p + Eigen::Vector2d(h, 0)) - m.height(p - Eigen::Vector2d(h, 0))) / (2 * h);
    const double fy = (m.height(p + Eigen::Vector2d(0, h)) - m.height(p - Eigen::Vector2d(0, h))) / (2 * h);
    CHECK(g[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(g[1]) < 1e-6);
    CHECK(std::abs(fx - g[0]) < 1e-6);
    CHECK(std::abs(fy - g[1]) < 1e-6);
  }
}

TEST_CASE("bilinear gradient on a curved patch") {
  const TerrainMap m = small_map();
  const Eigen::Vector2d p(13.0, -4.5);
  const double h = 1e-6;
  const Eigen::Vector2d g = m.gradient(p);
  CHECK(g[0] == doctest::Approx((m.height(p + Eigen::Vector2d(h, 0)) - m.height(p - Eigen::Vector2d(h, 0))) / (2 * h)));
  CHECK(g[1] == doctest::Approx((m.height(p + Eigen::Vector2d(0, h)) - m.height(p - Eigen::Vector2d(0, h))) / (2 * h)));
}

TEST_CASE("ESRI ASCII grid round trip") {
  const TerrainMap m = small_map();
  std::stringstream ss;
  write_ascii_grid(ss, m);
  const std::string text = ss.str();
  CHECK(text.find("ncols") != std::string::npos);
  // first data row is the northern edge
  CHECK(text.find("8 9 10 20") != std::string::npos);
  const TerrainMap r = read_ascii_grid(ss);
  CHECK(r.heights() == m.heights());
  CHECK(r.origin().isApprox(m.origin()));
  CHECK(r.cell_size() == m.cell_size());
}

TEST_CASE("ESRI reader rejects malformed input") {
  std::stringstream missing("ncols 2\nnrows 2\nxllcorner 0\ncellsize 1\n1 2\n3 4\n");
  CHECK_THROWS_AS(read_ascii_grid(missing), TerrainError);
  std::stringstream shortgrid("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3\n");
  CHECK_THROWS_AS(read_ascii_grid(shortgrid), TerrainError);
  std::stringstream nodata("ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 -9999\n");
  CHECK_THROWS_AS(read_ascii_grid(nodata), TerrainError);
}

TEST_CASE("synthetic generators") {
  const TerrainFootprint fp;
  const TerrainMap hills = make_two_hill_terrain(fp, TwoHillSpec{});
  CHECK(hills.height({-300.0, 0.0}) == doctest::Approx(100.0).epsilon(1e-3));
  CHECK(hills.height({300.0, 0.0}) == doctest::Approx(100.0).epsilon(1e-3));
  CHECK(hills.height({0.0, 0.0}) < 1.0);

  TwoZoneSpec z;
  const TerrainMap zones = make_two_zone_terrain(fp, z);
  for (double x = -490.0; x < -10.0; x += 37.0) CHECK(zones.gradient({x, 13.0}).norm() < 1e-12);
  double rough = 0.0;
  for (double x = 10.0; x < 490.0; x += 7.0) rough += zones.gradient({x, 13.0}).norm();
  CHECK(rough > 1.0);
  z.seed = 2;
  CHECK(make_two_zone_terrain(fp, z).heights() != zones.heights());
  CHECK(make_two_zone_terrain(fp, TwoZoneSpec{}).heights() == zones.heights());
}
