#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "sparta/angle_fourier.hpp"
#include "sparta/risk_dist.hpp"

namespace sparta {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  friend bool operator==(const Point3&, const Point3&) = default;
};

// Heightmap sampled on grid vertices: heights[r * cols + c] is the elevation at
// world (origin.x + c * resolution, origin.y + r * resolution). Rows run along
// +y, columns along +x.
class Terrain {
 public:
  Terrain(int rows, int cols, double resolution, Vec2 origin, std::vector<double> heights);
  static Terrain flat(int rows, int cols, double resolution, Vec2 origin = {});

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double resolution() const { return resolution_; }
  Vec2 origin() const { return origin_; }
  const std::vector<double>& heights() const { return heights_; }

  double at(int r, int c) const { return heights_[static_cast<std::size_t>(r) * cols_ + c]; }
  double& at(int r, int c) { return heights_[static_cast<std::size_t>(r) * cols_ + c]; }

  double extent_x() const { return (cols_ - 1) * resolution_; }
  double extent_y() const { return (rows_ - 1) * resolution_; }
  double max_height() const;
  bool contains(Vec2 p) const;
  // Bilinear height; throws BoundsError outside the grid.
  double height_at(Vec2 p) const;

  friend bool operator==(const Terrain&, const Terrain&) = default;

 private:
  int rows_;
  int cols_;
  double resolution_;
  Vec2 origin_;
  std::vector<double> heights_;
};

// Square patch resampled at cell centers: heights[i * dim + j] sits at local
// (-side/2 + (j + 0.5) * res, -side/2 + (i + 0.5) * res) around `center`.
struct TerrainPatch {
  int dim = 0;
  double resolution = 0.0;
  Vec2 center;
  std::vector<double> heights;

  double side_length() const { return dim * resolution; }
  double at(int i, int j) const { return heights[static_cast<std::size_t>(i) * dim + j]; }
  // Bilinear height at a local offset from the center, clamped to the sampled cells.
  double height_local(double dx, double dy) const;

  friend bool operator==(const TerrainPatch&, const TerrainPatch&) = default;
};

struct PointCloud {
  std::vector<Point3> points;
  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

struct VehicleSpec {
  double wheel_radius = 0.15;
  double track_width = 0.5;
  double wheelbase = 0.6;
  double step_length = 0.075;

  void validate() const;
  double footprint_diagonal() const;
};

struct ObstacleRowParams {
  int width_cells = 161;  // rows, across the row (y)
  int depth_cells = 121;  // columns, travel direction (x)
  int num_obstacles = 10;
  double min_height = 0.13;
  double max_height = 0.15;
  double resolution = 0.05;
  std::uint64_t seed = 0;
  // Fraction of the depth where the obstacle band is centered.
  double band_position = 0.5;
  double wedge_fraction = 0.6;
  double max_yaw_jitter = 0.35;
};

// Flat ground with a packed band of boxes and wedges of similar size.
Terrain gen_obstacle_row(const ObstacleRowParams& params);

struct BoulderFieldParams {
  double length_m = 40.0;
  double width_m = 4.0;
  // Boulders per square meter.
  double density = 0.5;
  double resolution = 0.05;
  std::uint64_t seed = 0;
  // Half the boulders are broad and tall, half narrow and steep.
  double broad_min_radius = 0.7;
  double broad_max_radius = 1.2;
  double broad_min_height = 0.2;
  double broad_max_height = 0.35;
  double steep_min_radius = 0.12;
  double steep_max_radius = 0.16;
  double steep_min_height = 0.15;
  double steep_max_height = 0.2;
};

// Superposed raised-cosine bumps.
Terrain gen_boulder_field(const BoulderFieldParams& params);

// Copies the dim x dim terrain vertices (dim = round(side / resolution)) of the
// window nearest to `center`; the returned center is the snapped window center.
// Throws BoundsError when the window leaves the terrain.
TerrainPatch extract_patch(const Terrain& t, Vec2 center, double side_length);
bool patch_fits(const Terrain& t, Vec2 center, double side_length);

PointCloud sample_point_cloud(const TerrainPatch& p, int points_per_cell, std::uint64_t seed);

// Deterministic part of the oracle: the largest height increase over any
// step_length window along either front-wheel track, divided by the wheel
// radius and clipped to [0, 1].
double risk_core(const TerrainPatch& p, AngleOfApproach phi, const VehicleSpec& v);

// Adds bounded uniform noise of half-width 0.1 * (core + 0.05), then clips.
double perturb_risk(double core, std::mt19937_64& rng);

double traversal_risk(const TerrainPatch& p, AngleOfApproach phi, const VehicleSpec& v,
                      std::uint64_t seed);

RiskDistribution empirical_distribution(const TerrainPatch& p, AngleOfApproach phi,
                                        const VehicleSpec& v, int draws,
                                        const BinGeometry& geometry, std::uint64_t seed);

// Histogram of `draws` oracle samples around a known core value.
RiskDistribution histogram_from_core(double core, int draws, const BinGeometry& geometry,
                                     std::uint64_t seed);

// Highest elevation any front-wheel track can reach at any heading (the disc of
// the chord radius around the patch center), divided by wheel radius and
// clipped to [0, 1]. Independent of the approach angle.
double max_footprint_elevation(const TerrainPatch& p, const VehicleSpec& v);

}  // namespace sparta
