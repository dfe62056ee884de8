#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numbers>
#include <random>

#include "sparta/errors.hpp"
#include "sparta/terrain.hpp"
#include "test_support.hpp"

using namespace sparta;
using Catch::Matchers::WithinAbs;

namespace {

constexpr double kPi = std::numbers::pi;
const VehicleSpec kVehicle{};
const BinGeometry g8(8, 0.0, 1.0);

// 2 m x 2 m terrain with a raised band of height h spanning all y, width
// `band` along x, centered under the patch at (1, 1).
TerrainPatch band_patch(double h, double band) {
  const Terrain flat = Terrain::flat(41, 41, 0.05);
  const Vec2 c = extract_patch(flat, {1.0, 1.0}, 1.2).center;
  const Terrain t = test::block_terrain(41, 41, 0.05, c.x - 0.5 * band, c.x + 0.5 * band, -1.0, 3.0, h);
  return extract_patch(t, {1.0, 1.0}, 1.2);
}

// Step of height h from the patch center onwards (+x).
TerrainPatch step_patch(double h) {
  const Terrain flat = Terrain::flat(41, 41, 0.05);
  const Vec2 c = extract_patch(flat, {1.0, 1.0}, 1.2).center;
  return extract_patch(test::block_terrain(41, 41, 0.05, c.x, 5.0, -1.0, 3.0, h), {1.0, 1.0}, 1.2);
}

TerrainPatch random_patch(std::mt19937_64& rng, int dim, double res, double max_h) {
  std::uniform_real_distribution<double> u(0.0, max_h);
  TerrainPatch p{dim, res, {0.0, 0.0}, std::vector<double>(static_cast<std::size_t>(dim) * dim)};
  for (double& h : p.heights) h = u(rng);
  return p;
}

}  // namespace

TEST_CASE("terrain construction and lookup", "[terrain]") {
  const Terrain t = test::block_terrain(11, 21, 0.1, 0.5, 1.0, 0.0, 2.0, 0.2);
  CHECK(t.extent_x() == Catch::Approx(2.0));
  CHECK(t.extent_y() == Catch::Approx(1.0));
  CHECK(t.max_height() == 0.2);
  CHECK_THAT(t.height_at({0.7, 0.3}), WithinAbs(0.2, 1e-12));
  CHECK_THAT(t.height_at({0.45, 0.3}), WithinAbs(0.1, 1e-12));
  CHECK_THROWS_AS(t.height_at({-0.5, 0.0}), BoundsError);
  CHECK_THROWS_AS(Terrain(1, 5, 0.1, {}, std::vector<double>(5)), GenerationError);
  CHECK_THROWS_AS(Terrain(2, 2, 0.0, {}, std::vector<double>(4)), InvalidArgument);
  CHECK_THROWS_AS(Terrain(2, 2, 0.1, {}, std::vector<double>(3)), DimensionError);
  CHECK_THROWS_AS(Terrain(2, 2, 0.1, {}, {0, 0, std::nan(""), 0}), InvalidArgument);
}

TEST_CASE("vehicle validation", "[terrain]") {
  CHECK_NOTHROW(kVehicle.validate());
  VehicleSpec v;
  v.step_length = 0.2;
  CHECK_THROWS_AS(v.validate(), InvalidArgument);
  v = {};
  v.track_width = -1.0;
  CHECK_THROWS_AS(v.validate(), InvalidArgument);
}

TEST_CASE("obstacle row generator", "[terrain]") {
  ObstacleRowParams p;
  p.num_obstacles = 0;
  const Terrain empty = gen_obstacle_row(p);
  CHECK(std::all_of(empty.heights().begin(), empty.heights().end(), [](double h) { return h == 0.0; }));

  p.num_obstacles = 10;
  p.seed = 42;
  const Terrain a = gen_obstacle_row(p);
  CHECK(a == gen_obstacle_row(p));
  CHECK(a.max_height() >= p.min_height);
  CHECK(a.max_height() <= p.max_height);
  CHECK(a.rows() == p.width_cells);
  CHECK(a.cols() == p.depth_cells);

  p.seed = 43;
  CHECK_FALSE(a == gen_obstacle_row(p));

  p.num_obstacles = 1000;
  CHECK_THROWS_AS(gen_obstacle_row(p), GenerationError);
}

TEST_CASE("boulder field generator", "[terrain]") {
  BoulderFieldParams p;
  p.density = 0.0;
  const Terrain flat = gen_boulder_field(p);
  CHECK(flat.max_height() == 0.0);
  CHECK(flat.extent_x() == Catch::Approx(40.0));

  p.density = 0.5;
  p.seed = 7;
  const Terrain t = gen_boulder_field(p);
  CHECK(t == gen_boulder_field(p));
  const double half = 0.5 * t.max_height();
  const auto above = std::count_if(t.heights().begin(), t.heights().end(), [&](double h) { return h > half; });
  const double frac = static_cast<double>(above) / static_cast<double>(t.heights().size());
  CHECK(frac > 0.0);
  CHECK(frac < 1.0);
}

TEST_CASE("patch extraction", "[terrain]") {
  const Terrain flat = Terrain::flat(41, 41, 0.05);
  const TerrainPatch p = extract_patch(flat, {1.0, 1.0}, 1.2);
  CHECK(p.dim == 24);
  CHECK(p.side_length() == Catch::Approx(1.2));
  CHECK(std::all_of(p.heights.begin(), p.heights.end(), [](double h) { return h == 0.0; }));
  CHECK(p == extract_patch(flat, {1.0, 1.0}, 1.2));
  // Nearby float centers snap onto the same window.
  CHECK(p == extract_patch(flat, {1.0 + 1e-9, 1.0 - 1e-9}, 1.2));

  CHECK_THROWS_AS(extract_patch(flat, {0.2, 1.0}, 1.2), BoundsError);
  CHECK_FALSE(patch_fits(flat, {0.2, 1.0}, 1.2));
  CHECK(patch_fits(flat, {1.0, 1.0}, 1.2));

  const TerrainPatch box = band_patch(0.12, 0.3);
  CHECK_THAT(*std::max_element(box.heights.begin(), box.heights.end()), WithinAbs(0.12, 1e-9));
}

TEST_CASE("point cloud sampling", "[terrain]") {
  const TerrainPatch flat = extract_patch(Terrain::flat(41, 41, 0.05), {1.0, 1.0}, 1.2);
  const PointCloud c = sample_point_cloud(flat, 3, 5);
  CHECK(c.points.size() == static_cast<std::size_t>(24 * 24 * 3));
  CHECK(std::all_of(c.points.begin(), c.points.end(), [](const Point3& q) { return q.z == 0.0; }));
  CHECK(c == sample_point_cloud(flat, 3, 5));
  CHECK_FALSE(c == sample_point_cloud(flat, 3, 6));
  CHECK_THROWS_AS(sample_point_cloud(flat, 0, 5), InvalidArgument);

  const TerrainPatch step = step_patch(0.1);
  for (const Point3& q : sample_point_cloud(step, 2, 9).points) {
    REQUIRE(std::isfinite(q.z));
    REQUIRE(q.z >= 0.0);
    REQUIRE(q.z <= 0.1);
  }
}

TEST_CASE("oracle on flat ground", "[terrain]") {
  const TerrainPatch flat = extract_patch(Terrain::flat(41, 41, 0.05), {1.0, 1.0}, 1.2);
  for (double phi : {0.0, 0.7, 2.0, 4.5}) {
    CHECK(risk_core(flat, AngleOfApproach(phi), kVehicle) == 0.0);
    for (std::uint64_t s = 0; s < 20; ++s) {
      const double r = traversal_risk(flat, AngleOfApproach(phi), kVehicle, s);
      REQUIRE(r >= 0.0);
      REQUIRE(r <= 0.005);
    }
  }
  const auto d = empirical_distribution(flat, AngleOfApproach(1.0), kVehicle, 1000, g8, 3);
  CHECK(d.probs()[0] == 1.0);
}

TEST_CASE("oracle step cases", "[terrain]") {
  CHECK(risk_core(step_patch(kVehicle.wheel_radius), AngleOfApproach(0.0), kVehicle) == 1.0);
  // Driving down the step is harmless.
  CHECK(risk_core(step_patch(kVehicle.wheel_radius), AngleOfApproach(kPi), kVehicle) == 0.0);

  // A band narrower than the track: head-on both wheels climb it, near-parallel
  // the wheels pass on either side.
  const TerrainPatch band = band_patch(kVehicle.wheel_radius, 0.2);
  const double head_on = risk_core(band, AngleOfApproach(0.0), kVehicle);
  CHECK(head_on == 1.0);
  for (double phi : {kPi / 2 - 0.05, kPi / 2 + 0.05, 1.5 * kPi + 0.03}) {
    CHECK(risk_core(band, AngleOfApproach(phi), kVehicle) < head_on);
  }

  VehicleSpec wide;
  wide.track_width = 1.2;
  CHECK_THROWS_AS(risk_core(band, AngleOfApproach(0.0), wide), BoundsError);
}

TEST_CASE("oracle severity is monotone in step height", "[terrain][property]") {
  double prev = -1.0;
  for (int k = 0; k <= 30; ++k) {
    const double h = kVehicle.wheel_radius * k / 30.0;
    const double r = risk_core(step_patch(h), AngleOfApproach(0.0), kVehicle);
    REQUIRE(r >= prev);
    REQUIRE_THAT(r, WithinAbs(h / kVehicle.wheel_radius, 1e-9));
    prev = r;
  }
}

TEST_CASE("oracle mirror symmetry", "[terrain][property]") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  for (int trial = 0; trial < 50; ++trial) {
    TerrainPatch p = random_patch(rng, 24, 0.05, 0.15);
    // Mirror rows about the x axis through the center.
    for (int i = 0; i < p.dim / 2; ++i) {
      for (int j = 0; j < p.dim; ++j) {
        p.heights[static_cast<std::size_t>(p.dim - 1 - i) * p.dim + j] = p.at(i, j);
      }
    }
    for (int k = 0; k < 20; ++k) {
      const double phi = u(rng);
      REQUIRE_THAT(risk_core(p, AngleOfApproach(phi), kVehicle),
                   WithinAbs(risk_core(p, AngleOfApproach(-phi), kVehicle), 1e-9));
    }
  }
}

TEST_CASE("oracle periodicity", "[terrain][property]") {
  // phi + 2pi is itself rounded, so the wrapped angle can differ from phi by
  // one ulp of 2pi; bit equality is required whenever the angles agree.
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  int exact = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const TerrainPatch p = random_patch(rng, 24, 0.05, 0.15);
    for (int k = 0; k < 50; ++k) {
      const AngleOfApproach a(u(rng));
      const AngleOfApproach b(a.radians() + kTwoPi);
      const double ra = risk_core(p, a, kVehicle);
      const double rb = risk_core(p, b, kVehicle);
      if (a.radians() == b.radians()) {
        REQUIRE(ra == rb);
        ++exact;
      } else {
        REQUIRE(std::abs(a.radians() - b.radians()) < 1e-14);
        REQUIRE_THAT(ra, WithinAbs(rb, 1e-12));
      }
    }
  }
  CHECK(exact > 0);
}

TEST_CASE("oracle noise model", "[terrain]") {
  std::mt19937_64 rng(4);
  for (double core : {0.0, 0.3, 0.9, 1.0}) {
    const double hw = 0.1 * (core + 0.05);
    for (int i = 0; i < 1000; ++i) {
      const double r = perturb_risk(core, rng);
      REQUIRE(r >= std::max(0.0, core - hw));
      REQUIRE(r <= std::min(1.0, core + hw));
    }
  }
  const auto d = histogram_from_core(0.5, 10000, g8, 11);
  CHECK_THAT(mean(d), WithinAbs(0.5, 0.02));
  CHECK(d == histogram_from_core(0.5, 10000, g8, 11));
  CHECK_THROWS_AS(histogram_from_core(0.5, 0, g8, 11), InvalidArgument);

  const TerrainPatch step = step_patch(0.1);
  CHECK(empirical_distribution(step, AngleOfApproach(0.0), kVehicle, 500, g8, 2) ==
        empirical_distribution(step, AngleOfApproach(0.0), kVehicle, 500, g8, 2));
}

TEST_CASE("max footprint elevation", "[terrain]") {
  const TerrainPatch band = band_patch(0.075, 0.2);
  const double e = max_footprint_elevation(band, kVehicle);
  CHECK_THAT(e, WithinAbs(0.5, 1e-12));
  // Angle free: every heading sees the same value, unlike the oracle.
  CHECK(risk_core(band, AngleOfApproach(kPi / 2 + 0.05), kVehicle) < e);
  const TerrainPatch flat = extract_patch(Terrain::flat(41, 41, 0.05), {1.0, 1.0}, 1.2);
  CHECK(max_footprint_elevation(flat, kVehicle) == 0.0);
}
