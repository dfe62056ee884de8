#include "sparta/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "sparta/errors.hpp"

namespace sparta {

PointCloud normalize_cloud(const PointCloud& q) {
  if (q.points.empty()) throw EmptyInput("cannot normalize an empty point cloud");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::array<double, 3> lo{kInf, kInf, kInf};
  std::array<double, 3> hi{-kInf, -kInf, -kInf};
  for (const auto& p : q.points) {
    const std::array<double, 3> v{p.x, p.y, p.z};
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], v[a]);
      hi[a] = std::max(hi[a], v[a]);
    }
  }
  // Target box extents: x and y span 1, z spans 0.5.
  const std::array<double, 3> box{1.0, 1.0, 0.5};
  double scale = kInf;
  for (int a = 0; a < 3; ++a) {
    const double range = hi[a] - lo[a];
    if (range > 0.0) scale = std::min(scale, box[a] / range);
  }
  if (scale == kInf) scale = 0.0;

  const double cx = 0.5 * (lo[0] + hi[0]);
  const double cy = 0.5 * (lo[1] + hi[1]);
  PointCloud out;
  out.points.reserve(q.points.size());
  for (const auto& p : q.points) {
    out.points.push_back({(p.x - cx) * scale, (p.y - cy) * scale, (p.z - lo[2]) * scale});
  }
  return out;
}

namespace {

int pillar_index(double coord) {
  const double t = std::floor((coord + 0.5) * kPillarGrid);
  if (!(t > 0.0)) return 0;
  if (t >= kPillarGrid - 1) return kPillarGrid - 1;
  return static_cast<int>(t);
}

}  // namespace

FeatureGrid pillarize(const PointCloud& q) {
  FeatureGrid grid;
  if (q.points.empty()) return grid;
  std::vector<std::vector<double>> cells(kPillarGrid * kPillarGrid);
  for (const auto& p : q.points) {
    cells[static_cast<std::size_t>(pillar_index(p.y) * kPillarGrid + pillar_index(p.x))]
        .push_back(p.z);
  }
  const double occupancy_scale = 1.0 / static_cast<double>(q.points.size());
  for (std::size_t cell = 0; cell < cells.size(); ++cell) {
    auto& zs = cells[cell];
    if (zs.empty()) continue;
    // Sorting makes every statistic independent of point order.
    std::sort(zs.begin(), zs.end());
    const double count = static_cast<double>(zs.size());
    double sum = 0.0;
    for (double z : zs) sum += z;
    const double mean = std::min(sum / count, zs.back());
    double sq = 0.0;
    for (double z : zs) sq += (z - mean) * (z - mean);
    double* out = &grid.values[cell * kPillarChannels];
    out[0] = count * occupancy_scale;
    out[1] = mean;
    out[2] = zs.back();
    out[3] = std::sqrt(sq / count);
  }
  return grid;
}

FeatureGrid patch_features(const TerrainPatch& p, int points_per_cell, std::uint64_t seed) {
  return pillarize(normalize_cloud(sample_point_cloud(p, points_per_cell, seed)));
}

}  // namespace sparta
