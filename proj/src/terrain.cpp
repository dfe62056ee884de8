#include "sparta/terrain.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sparta/errors.hpp"

namespace sparta {

namespace {

// Sub-samples per step_length window when tracing wheel paths.
constexpr int kTraceSubsteps = 8;
constexpr double kNoiseScale = 0.1;
constexpr double kNoiseFloor = 0.05;

double bilinear(double fx, double fy, int rows, int cols, auto&& at) {
  fx = std::clamp(fx, 0.0, static_cast<double>(cols - 1));
  fy = std::clamp(fy, 0.0, static_cast<double>(rows - 1));
  const int c0 = std::min(static_cast<int>(fx), cols - 2);
  const int r0 = std::min(static_cast<int>(fy), rows - 2);
  const double tx = fx - c0;
  const double ty = fy - r0;
  const double h00 = at(r0, c0), h01 = at(r0, c0 + 1);
  const double h10 = at(r0 + 1, c0), h11 = at(r0 + 1, c0 + 1);
  return (1.0 - ty) * ((1.0 - tx) * h00 + tx * h01) + ty * ((1.0 - tx) * h10 + tx * h11);
}

struct WheelTracks {
  std::vector<double> left;
  std::vector<double> right;
};

// Heights along both front-wheel tracks through the patch center at heading phi,
// sampled every step_length / kTraceSubsteps. The chord length is the same for
// every heading so that no direction sees a longer path.
WheelTracks trace_wheels(const TerrainPatch& p, AngleOfApproach phi, const VehicleSpec& v) {
  v.validate();
  if (p.dim < 2) throw BoundsError("patch must be at least 2x2 cells");
  if (v.footprint_diagonal() >= p.side_length()) {
    throw BoundsError("vehicle footprint diagonal " + std::to_string(v.footprint_diagonal()) +
                      " m exceeds patch side " + std::to_string(p.side_length()) + " m");
  }
  const double radius = 0.5 * p.side_length() - 0.5 * p.resolution;
  const double half_track = 0.5 * v.track_width;
  const double half_chord = std::sqrt(std::max(0.0, radius * radius - half_track * half_track));
  const double spacing = v.step_length / kTraceSubsteps;
  const int samples = static_cast<int>(std::floor(2.0 * half_chord / spacing + 1e-9)) + 1;

  const double c = std::cos(phi.radians());
  const double s = std::sin(phi.radians());
  WheelTracks tracks;
  tracks.left.reserve(static_cast<std::size_t>(samples));
  tracks.right.reserve(static_cast<std::size_t>(samples));
  for (int j = 0; j < samples; ++j) {
    const double along = -half_chord + j * spacing;
    const double bx = along * c;
    const double by = along * s;
    tracks.left.push_back(p.height_local(bx - half_track * s, by + half_track * c));
    tracks.right.push_back(p.height_local(bx + half_track * s, by - half_track * c));
  }
  return tracks;
}

double max_window_rise(const std::vector<double>& h) {
  double best = 0.0;
  for (std::size_t j = 0; j + kTraceSubsteps < h.size(); ++j) {
    best = std::max(best, h[j + kTraceSubsteps] - h[j]);
  }
  return best;
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw InvalidArgument(std::string(what) + " must be finite and > 0");
  }
}

}  // namespace

Terrain::Terrain(int rows, int cols, double resolution, Vec2 origin, std::vector<double> heights)
    : rows_(rows), cols_(cols), resolution_(resolution), origin_(origin),
      heights_(std::move(heights)) {
  if (rows_ < 2 || cols_ < 2) throw GenerationError("terrain needs at least 2x2 vertices");
  require_positive(resolution_, "terrain resolution");
  if (heights_.size() != static_cast<std::size_t>(rows_) * cols_) {
    throw DimensionError("terrain height buffer does not match rows x cols");
  }
  if (!std::all_of(heights_.begin(), heights_.end(), [](double h) { return std::isfinite(h); })) {
    throw InvalidArgument("terrain heights must be finite");
  }
}

Terrain Terrain::flat(int rows, int cols, double resolution, Vec2 origin) {
  return Terrain(rows, cols, resolution, origin,
                 std::vector<double>(static_cast<std::size_t>(rows) * cols, 0.0));
}

double Terrain::max_height() const { return *std::max_element(heights_.begin(), heights_.end()); }

bool Terrain::contains(Vec2 p) const {
  constexpr double kSlack = 1e-9;
  return p.x >= origin_.x - kSlack && p.y >= origin_.y - kSlack &&
         p.x <= origin_.x + extent_x() + kSlack && p.y <= origin_.y + extent_y() + kSlack;
}

double Terrain::height_at(Vec2 p) const {
  if (!contains(p)) {
    throw BoundsError("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                      ") lies outside the terrain");
  }
  return bilinear((p.x - origin_.x) / resolution_, (p.y - origin_.y) / resolution_, rows_, cols_,
                  [this](int r, int c) { return at(r, c); });
}

double TerrainPatch::height_local(double dx, double dy) const {
  const double half = 0.5 * side_length();
  return bilinear((dx + half) / resolution - 0.5, (dy + half) / resolution - 0.5, dim, dim,
                  [this](int i, int j) { return at(i, j); });
}

void VehicleSpec::validate() const {
  require_positive(wheel_radius, "wheel_radius");
  require_positive(track_width, "track_width");
  require_positive(wheelbase, "wheelbase");
  require_positive(step_length, "step_length");
  if (step_length > wheel_radius) throw InvalidArgument("step_length must not exceed wheel_radius");
}

double VehicleSpec::footprint_diagonal() const { return std::hypot(track_width, wheelbase); }

Terrain gen_obstacle_row(const ObstacleRowParams& params) {
  if (params.width_cells < 2 || params.depth_cells < 2) {
    throw GenerationError("obstacle row needs at least 2x2 cells");
  }
  require_positive(params.resolution, "resolution");
  if (params.num_obstacles < 0) throw GenerationError("num_obstacles must be >= 0");
  if (params.min_height < 0.0 || params.max_height < params.min_height) {
    throw GenerationError("obstacle height range must satisfy 0 <= min <= max");
  }
  Terrain t = Terrain::flat(params.width_cells, params.depth_cells, params.resolution);
  if (params.num_obstacles == 0) return t;

  const double width_m = t.extent_y();
  const double depth_m = t.extent_x();
  const double slot = width_m / params.num_obstacles;
  if (slot < 4.0 * params.resolution || slot > depth_m) {
    throw GenerationError("cannot place " + std::to_string(params.num_obstacles) +
                          " obstacles in a " + std::to_string(width_m) + " m wide row");
  }

  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  for (int k = 0; k < params.num_obstacles; ++k) {
    const double cy = (k + 0.5) * slot + uniform(-0.1, 0.1) * slot;
    const double cx = params.band_position * depth_m + uniform(-0.1, 0.1) * slot;
    const double lateral = slot * uniform(1.05, 1.2);
    const double length = slot * uniform(0.8, 1.0);
    const double height = uniform(params.min_height, params.max_height);
    const bool wedge = unit(rng) < params.wedge_fraction;
    const double facing = unit(rng) < 0.5 ? 0.0 : std::numbers::pi;
    const double yaw = facing + uniform(-params.max_yaw_jitter, params.max_yaw_jitter);

    const double cos_yaw = std::cos(yaw), sin_yaw = std::sin(yaw);
    const double reach = 0.5 * std::hypot(lateral, length);
    const int c_lo = std::max(0, static_cast<int>(std::floor((cx - reach) / params.resolution)));
    const int c_hi = std::min(t.cols() - 1, static_cast<int>(std::ceil((cx + reach) / params.resolution)));
    const int r_lo = std::max(0, static_cast<int>(std::floor((cy - reach) / params.resolution)));
    const int r_hi = std::min(t.rows() - 1, static_cast<int>(std::ceil((cy + reach) / params.resolution)));
    for (int r = r_lo; r <= r_hi; ++r) {
      for (int c = c_lo; c <= c_hi; ++c) {
        const double dx = c * params.resolution - cx;
        const double dy = r * params.resolution - cy;
        // u along the wedge's rising direction, w lateral
        const double u = dx * cos_yaw + dy * sin_yaw;
        const double w = -dx * sin_yaw + dy * cos_yaw;
        if (std::abs(u) > 0.5 * length || std::abs(w) > 0.5 * lateral) continue;
        const double h = wedge ? height * (u + 0.5 * length) / length : height;
        t.at(r, c) = std::max(t.at(r, c), h);
      }
    }
  }
  return t;
}

Terrain gen_boulder_field(const BoulderFieldParams& params) {
  require_positive(params.length_m, "length_m");
  require_positive(params.width_m, "width_m");
  require_positive(params.resolution, "resolution");
  if (params.density < 0.0) throw GenerationError("density must be >= 0");
  const int cols = static_cast<int>(std::lround(params.length_m / params.resolution)) + 1;
  const int rows = static_cast<int>(std::lround(params.width_m / params.resolution)) + 1;
  Terrain t = Terrain::flat(rows, cols, params.resolution);

  const auto count =
      static_cast<long>(std::lround(params.density * params.length_m * params.width_m));
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  // Keep the ends clear so planners can start and stop on flat ground.
  const double margin = std::min(1.5, 0.25 * params.length_m);

  for (long b = 0; b < count; ++b) {
    const double cx = uniform(margin, params.length_m - margin);
    const double cy = uniform(0.0, params.width_m);
    const bool broad = unit(rng) < 0.5;
    const double radius = broad ? uniform(params.broad_min_radius, params.broad_max_radius)
                                : uniform(params.steep_min_radius, params.steep_max_radius);
    const double height = broad ? uniform(params.broad_min_height, params.broad_max_height)
                                : uniform(params.steep_min_height, params.steep_max_height);
    const int c_lo = std::max(0, static_cast<int>(std::floor((cx - radius) / params.resolution)));
    const int c_hi = std::min(cols - 1, static_cast<int>(std::ceil((cx + radius) / params.resolution)));
    const int r_lo = std::max(0, static_cast<int>(std::floor((cy - radius) / params.resolution)));
    const int r_hi = std::min(rows - 1, static_cast<int>(std::ceil((cy + radius) / params.resolution)));
    for (int r = r_lo; r <= r_hi; ++r) {
      for (int c = c_lo; c <= c_hi; ++c) {
        const double d = std::hypot(c * params.resolution - cx, r * params.resolution - cy);
        if (d >= radius) continue;
        t.at(r, c) += 0.5 * height * (1.0 + std::cos(std::numbers::pi * d / radius));
      }
    }
  }
  return t;
}

namespace {

struct PatchWindow {
  int dim = 0;
  int c0 = 0;
  int r0 = 0;
  bool inside = false;
};

// Samples land on terrain vertices, so the window snaps to the grid; a
// resample between vertices would smear vertical steps over two cells.
// Half-way cases round up.
PatchWindow patch_window(const Terrain& t, Vec2 center, double side_length) {
  PatchWindow w;
  w.dim = static_cast<int>(std::lround(side_length / t.resolution()));
  const double reach = 0.5 * (w.dim - 1) * t.resolution();
  const double fx = std::floor((center.x - reach - t.origin().x) / t.resolution() + 0.5 + 1e-6);
  const double fy = std::floor((center.y - reach - t.origin().y) / t.resolution() + 0.5 + 1e-6);
  w.inside = w.dim >= 2 && fx >= 0.0 && fy >= 0.0 && fx + w.dim <= t.cols() && fy + w.dim <= t.rows();
  if (w.inside) {
    w.c0 = static_cast<int>(fx);
    w.r0 = static_cast<int>(fy);
  }
  return w;
}

}  // namespace

bool patch_fits(const Terrain& t, Vec2 center, double side_length) {
  return side_length > 0.0 && patch_window(t, center, side_length).inside;
}

TerrainPatch extract_patch(const Terrain& t, Vec2 center, double side_length) {
  require_positive(side_length, "patch side_length");
  const PatchWindow w = patch_window(t, center, side_length);
  const int dim = w.dim;
  if (dim < 2) throw BoundsError("patch must span at least 2 terrain cells");
  TerrainPatch p;
  p.dim = dim;
  p.resolution = t.resolution();
  const double reach = 0.5 * (dim - 1) * p.resolution;
  p.center = {t.origin().x + w.c0 * t.resolution() + reach, t.origin().y + w.r0 * t.resolution() + reach};
  if (!w.inside) {
    throw BoundsError("patch at (" + std::to_string(center.x) + ", " + std::to_string(center.y) +
                      ") with side " + std::to_string(side_length) + " m leaves the terrain");
  }
  p.heights.resize(static_cast<std::size_t>(dim) * dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) p.heights[static_cast<std::size_t>(i) * dim + j] = t.at(w.r0 + i, w.c0 + j);
  }
  return p;
}

PointCloud sample_point_cloud(const TerrainPatch& p, int points_per_cell, std::uint64_t seed) {
  if (points_per_cell < 1) throw InvalidArgument("points_per_cell must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(p.dim) * p.dim * points_per_cell);
  const double half = 0.5 * p.side_length();
  for (int i = 0; i < p.dim; ++i) {
    for (int j = 0; j < p.dim; ++j) {
      for (int k = 0; k < points_per_cell; ++k) {
        const double dx = -half + (j + 0.5 + jitter(rng)) * p.resolution;
        const double dy = -half + (i + 0.5 + jitter(rng)) * p.resolution;
        cloud.points.push_back({p.center.x + dx, p.center.y + dy, p.height_local(dx, dy)});
      }
    }
  }
  return cloud;
}

double risk_core(const TerrainPatch& p, AngleOfApproach phi, const VehicleSpec& v) {
  const WheelTracks tracks = trace_wheels(p, phi, v);
  const double rise = std::max(max_window_rise(tracks.left), max_window_rise(tracks.right));
  return std::clamp(rise / v.wheel_radius, 0.0, 1.0);
}

double perturb_risk(double core, std::mt19937_64& rng) {
  const double half_width = kNoiseScale * (core + kNoiseFloor);
  std::uniform_real_distribution<double> noise(-half_width, half_width);
  return std::clamp(core + noise(rng), 0.0, 1.0);
}

double traversal_risk(const TerrainPatch& p, AngleOfApproach phi, const VehicleSpec& v,
                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return perturb_risk(risk_core(p, phi, v), rng);
}

RiskDistribution histogram_from_core(double core, int draws, const BinGeometry& geometry,
                                     std::uint64_t seed) {
  if (draws < 1) throw InvalidArgument("draws must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<double> counts(static_cast<std::size_t>(geometry.num_bins()), 0.0);
  for (int d = 0; d < draws; ++d) {
    counts[static_cast<std::size_t>(geometry.bin_of(perturb_risk(core, rng)))] += 1.0;
  }
  for (double& c : counts) c /= draws;
  return RiskDistribution(std::move(counts), geometry);
}

RiskDistribution empirical_distribution(const TerrainPatch& p, AngleOfApproach phi,
                                        const VehicleSpec& v, int draws,
                                        const BinGeometry& geometry, std::uint64_t seed) {
  return histogram_from_core(risk_core(p, phi, v), draws, geometry, seed);
}

double max_footprint_elevation(const TerrainPatch& p, const VehicleSpec& v) {
  v.validate();
  if (v.footprint_diagonal() >= p.side_length()) {
    throw BoundsError("vehicle footprint diagonal " + std::to_string(v.footprint_diagonal()) +
                      " m exceeds patch side " + std::to_string(p.side_length()) + " m");
  }
  // Every wheel-track sample of every heading lies within the chord radius.
  const double radius = 0.5 * p.side_length() - 0.5 * p.resolution;
  const double half = 0.5 * p.side_length();
  double top = 0.0;
  for (int i = 0; i < p.dim; ++i) {
    const double y = -half + (i + 0.5) * p.resolution;
    for (int j = 0; j < p.dim; ++j) {
      const double x = -half + (j + 0.5) * p.resolution;
      if (std::hypot(x, y) <= radius + 1e-9) top = std::max(top, p.at(i, j));
    }
  }
  return std::clamp(top / v.wheel_radius, 0.0, 1.0);
}

}  // namespace sparta
