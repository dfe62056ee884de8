#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "sparta/errors.hpp"
#include "sparta/features.hpp"
#include "test_support.hpp"

using namespace sparta;
using Catch::Matchers::WithinAbs;

namespace {

PointCloud random_cloud(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  PointCloud c;
  for (int i = 0; i < n; ++i) c.points.push_back({u(rng), u(rng), u(rng)});
  return c;
}

}  // namespace

TEST_CASE("normalize_cloud examples", "[features]") {
  const PointCloud cube{{{-0.5, -0.5, 0.0}, {0.5, 0.5, 0.5}, {0.1, -0.2, 0.3}}};
  const PointCloud same = normalize_cloud(cube);
  for (std::size_t i = 0; i < cube.points.size(); ++i) {
    CHECK_THAT(same.points[i].x, WithinAbs(cube.points[i].x, 1e-12));
    CHECK_THAT(same.points[i].y, WithinAbs(cube.points[i].y, 1e-12));
    CHECK_THAT(same.points[i].z, WithinAbs(cube.points[i].z, 1e-12));
  }

  const PointCloud big{{{0, 0, 0}, {10, 10, 5}, {5, 2, 1}}};
  const PointCloud n = normalize_cloud(big);
  CHECK_THAT(n.points[0].x, WithinAbs(-0.5, 1e-12));
  CHECK_THAT(n.points[1].x, WithinAbs(0.5, 1e-12));
  CHECK_THAT(n.points[1].z, WithinAbs(0.5, 1e-12));
  // s = 0.1
  CHECK_THAT(n.points[2].x, WithinAbs(0.0, 1e-12));
  CHECK_THAT(n.points[2].y, WithinAbs(-0.3, 1e-12));
  CHECK_THAT(n.points[2].z, WithinAbs(0.1, 1e-12));

  const PointCloud single = normalize_cloud(PointCloud{{{3.0, -2.0, 7.0}}});
  CHECK(single.points[0] == Point3{0.0, 0.0, 0.0});

  CHECK_THROWS_AS(normalize_cloud(PointCloud{}), EmptyInput);
}

TEST_CASE("normalize_cloud fits the box with one shared scale", "[features][property]") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> span(0.01, 20.0);
  for (int trial = 0; trial < 200; ++trial) {
    PointCloud c = random_cloud(rng, 50, 0.0, 1.0);
    const double sx = span(rng), sy = span(rng), sz = span(rng);
    for (auto& p : c.points) {
      p.x = p.x * sx - 3.0;
      p.y = p.y * sy + 8.0;
      p.z = p.z * sz + 1.0;
    }
    const PointCloud n = normalize_cloud(c);
    double lo[3] = {1e9, 1e9, 1e9}, hi[3] = {-1e9, -1e9, -1e9};
    for (const auto& p : n.points) {
      const double v[3] = {p.x, p.y, p.z};
      for (int a = 0; a < 3; ++a) {
        lo[a] = std::min(lo[a], v[a]);
        hi[a] = std::max(hi[a], v[a]);
      }
    }
    REQUIRE(lo[0] >= -0.5 - 1e-12);
    REQUIRE(hi[0] <= 0.5 + 1e-12);
    REQUIRE(lo[1] >= -0.5 - 1e-12);
    REQUIRE(hi[1] <= 0.5 + 1e-12);
    REQUIRE_THAT(lo[2], WithinAbs(0.0, 1e-12));
    REQUIRE(hi[2] <= 0.5 + 1e-12);
    // Some axis touches its bound.
    const bool touches = std::abs(hi[0] - lo[0] - 1.0) < 1e-9 || std::abs(hi[1] - lo[1] - 1.0) < 1e-9 ||
                         std::abs(hi[2] - 0.5) < 1e-9;
    REQUIRE(touches);
    // Aspect ratios survive.
    const double s = (n.points[1].x - n.points[0].x) / (c.points[1].x - c.points[0].x);
    REQUIRE_THAT((n.points[1].z - n.points[0].z), WithinAbs(s * (c.points[1].z - c.points[0].z), 1e-9));
    REQUIRE_THAT((n.points[1].y - n.points[0].y), WithinAbs(s * (c.points[1].y - c.points[0].y), 1e-9));
  }
}

TEST_CASE("pillarize examples", "[features]") {
  PointCloud flat;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int i = 0; i < 500; ++i) flat.points.push_back({u(rng), u(rng), 0.0});
  const FeatureGrid g = pillarize(flat);
  double occupancy = 0.0;
  for (int r = 0; r < kPillarGrid; ++r) {
    for (int c = 0; c < kPillarGrid; ++c) {
      occupancy += g.at(r, c, 0);
      for (int ch = 1; ch < kPillarChannels; ++ch) REQUIRE(g.at(r, c, ch) == 0.0);
    }
  }
  CHECK_THAT(occupancy, WithinAbs(1.0, 1e-12));

  // One point per cell at a known height.
  PointCloud grid;
  for (int r = 0; r < kPillarGrid; ++r) {
    for (int c = 0; c < kPillarGrid; ++c) {
      grid.points.push_back({-0.45 + 0.1 * c, -0.45 + 0.1 * r, 0.005 * (r * kPillarGrid + c) / 2.0});
    }
  }
  const FeatureGrid h = pillarize(grid);
  for (int r = 0; r < kPillarGrid; ++r) {
    for (int c = 0; c < kPillarGrid; ++c) {
      const double z = 0.005 * (r * kPillarGrid + c) / 2.0;
      REQUIRE(h.at(r, c, 0) == 0.01);
      REQUIRE(h.at(r, c, 1) == z);
      REQUIRE(h.at(r, c, 2) == z);
      REQUIRE(h.at(r, c, 3) == 0.0);
    }
  }

  // Boundary points land in the edge cells.
  const FeatureGrid corners = pillarize(PointCloud{{{-0.5, -0.5, 0.1}, {0.5, 0.5, 0.2}}});
  CHECK(corners.at(0, 0, 2) == 0.1);
  CHECK(corners.at(kPillarGrid - 1, kPillarGrid - 1, 2) == 0.2);

  const FeatureGrid two = pillarize(PointCloud{{{0.01, 0.01, 0.1}, {0.02, 0.02, 0.3}}});
  CHECK(two.at(5, 5, 0) == 1.0);
  CHECK_THAT(two.at(5, 5, 1), WithinAbs(0.2, 1e-15));
  CHECK(two.at(5, 5, 2) == 0.3);
  CHECK_THAT(two.at(5, 5, 3), WithinAbs(0.1, 1e-15));

  CHECK(pillarize(PointCloud{}) == FeatureGrid{});
}

TEST_CASE("pillarize ignores point order", "[features][property]") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    PointCloud c = normalize_cloud(random_cloud(rng, 1000, -3.0, 3.0));
    const FeatureGrid a = pillarize(c);
    for (int k = 0; k < 5; ++k) {
      std::shuffle(c.points.begin(), c.points.end(), rng);
      const FeatureGrid b = pillarize(c);
      for (int i = 0; i < kFeatureDim; ++i) REQUIRE_THAT(b.values[i], WithinAbs(a.values[i], 1e-12));
    }
  }
}

TEST_CASE("patch features are seeded", "[features]") {
  const TerrainPatch p =
      extract_patch(test::block_terrain(41, 41, 0.05, 0.8, 1.2, 0.0, 2.0, 0.1), {1.0, 1.0}, 1.2);
  const FeatureGrid a = patch_features(p, 2, 9);
  CHECK(a == patch_features(p, 2, 9));
  CHECK_FALSE(a == patch_features(p, 2, 10));
  for (double v : a.values) REQUIRE(std::isfinite(v));
}
