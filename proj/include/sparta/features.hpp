#pragma once

#include <cstdint>
#include <vector>

#include "sparta/terrain.hpp"

namespace sparta {

inline constexpr int kPillarGrid = 10;
inline constexpr int kPillarChannels = 4;
inline constexpr int kFeatureDim = kPillarGrid * kPillarGrid * kPillarChannels;

// 10x10 pillar statistics over the normalized cloud. Channel order per cell is
// [relative occupancy, mean z, max z, std z]; cells are row-major with rows
// along +y. Relative occupancy is the cell's share of all points.
struct FeatureGrid {
  std::vector<double> values = std::vector<double>(kFeatureDim, 0.0);

  double at(int row, int col, int channel) const {
    return values[static_cast<std::size_t>((row * kPillarGrid + col) * kPillarChannels + channel)];
  }

  friend bool operator==(const FeatureGrid&, const FeatureGrid&) = default;
};

// Uniform scale + translation into x, y in [-0.5, 0.5], z in [0, 0.5]. The
// bounding box is centered in x and y and its floor moved to z = 0. A cloud
// with no spatial extent maps onto the origin.
PointCloud normalize_cloud(const PointCloud& q);

// Expects a normalized cloud; points on the outer boundary fall into the edge cells.
FeatureGrid pillarize(const PointCloud& q);

// sample_point_cloud -> normalize_cloud -> pillarize
FeatureGrid patch_features(const TerrainPatch& p, int points_per_cell, std::uint64_t seed);

}  // namespace sparta
