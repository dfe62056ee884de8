#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sparta/coeff_cache.hpp"
#include "sparta/features.hpp"
#include "sparta/model.hpp"
#include "sparta/risk_dist.hpp"
#include "sparta/terrain.hpp"

namespace sparta {

struct Cell {
  int x = 0;
  int y = 0;
  auto operator<=>(const Cell&) const = default;
};

// Lattice state: a cell plus the heading index of the move that entered it.
struct LatticeNode {
  Cell cell;
  int heading = 0;
  auto operator<=>(const LatticeNode&) const = default;
};

struct LatticeEdge {
  Cell from;
  Cell to;
  int heading = 0;
  AngleOfApproach phi;  // geometric heading of the move, +x = 0, +y = pi/2
  double length = 0.0;
  Vec2 patch_center;    // world position of the (grid-snapped) move midpoint
  PatchKey key;
};

// Grid of cells over a terrain with H headings. H = 4, 8 or 16 selects 4-,
// 8- or 16-connected moves (16 adds knight moves). A move exists only when
// its patch lies fully inside the terrain.
class LatticeGraph {
 public:
  static LatticeGraph build(const Terrain& t, double cell_size, int headings = 8,
                            double patch_side = 1.2, std::string terrain_id = "terrain");

  int width() const { return nx_; }
  int height() const { return ny_; }
  int headings() const { return headings_; }
  double cell_size() const { return cell_size_; }
  double patch_side() const { return patch_side_; }
  const std::string& terrain_id() const { return terrain_id_; }

  bool contains(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < nx_ && c.y < ny_; }
  Vec2 cell_center(Cell c) const;
  // Nearest cell to a world position, clamped into the grid.
  Cell nearest_cell(Vec2 p) const;
  const std::vector<LatticeEdge>& edges_from(Cell c) const;
  std::size_t edge_count() const;

 private:
  int nx_ = 0;
  int ny_ = 0;
  int headings_ = 8;
  double cell_size_ = 1.0;
  double patch_side_ = 1.0;
  Vec2 origin_;
  std::string terrain_id_;
  std::vector<std::vector<LatticeEdge>> adjacency_;
};

struct CostWeights {
  double distance = 1.0;
  double risk = 10.0;
};

struct PlanQuery {
  Cell start;
  Cell goal;
  CvarLevel alpha{0.9};
  double risk_threshold = 1.0;
  CostWeights weights;

  void validate() const;
};

// Risk attached to traversing an edge at its approach angle.
class EdgeRiskModel {
 public:
  virtual ~EdgeRiskModel() = default;
  virtual double edge_risk(const LatticeEdge& e, CvarLevel alpha) = 0;
};

// CVaR from Fourier risk functions fetched through an optional cache.
// Without a cache every query recomputes the function.
class FunctionRisk : public EdgeRiskModel {
 public:
  using Compute = std::function<FourierRiskFunction(const LatticeEdge&)>;

  FunctionRisk(Compute compute, BinGeometry geometry, CoefficientCache* cache = nullptr);
  double edge_risk(const LatticeEdge& e, CvarLevel alpha) override;
  std::uint64_t computations() const { return computations_; }

 private:
  Compute compute_;
  BinGeometry geometry_;
  CoefficientCache* cache_;
  std::uint64_t computations_ = 0;
};

struct FeatureSettings {
  int points_per_cell = 2;
  std::uint64_t seed = 0;
};

// Seed for the point cloud of a patch, derived from its key so repeated
// extraction of the same patch is identical.
std::uint64_t patch_seed(const PatchKey& key, std::uint64_t base_seed);

FeatureGrid edge_features(const Terrain& t, const LatticeEdge& e, const FeatureSettings& fs);

// Builds FourierRiskFunctions with a sparta-head model.
FunctionRisk::Compute model_compute(const Terrain& t, const SpartaModel& m, FeatureSettings fs);

// Per-query inference with an angle_input (or angle_free) model; pillar
// features are memoized per patch, the network runs on every query.
class ReinferenceRisk : public EdgeRiskModel {
 public:
  ReinferenceRisk(const Terrain& t, const SpartaModel& m, FeatureSettings fs);
  double edge_risk(const LatticeEdge& e, CvarLevel alpha) override;

 private:
  const Terrain& terrain_;
  const SpartaModel& model_;
  FeatureSettings features_;
  std::map<PatchKey, FeatureGrid> memo_;
};

// Elev baseline: max_footprint_elevation of the edge patch. Ignores alpha and
// the approach angle.
class ElevationRisk : public EdgeRiskModel {
 public:
  ElevationRisk(const Terrain& t, VehicleSpec v) : terrain_(t), vehicle_(v) {}
  double edge_risk(const LatticeEdge& e, CvarLevel alpha) override;

 private:
  const Terrain& terrain_;
  VehicleSpec vehicle_;
};

// Exact oracle core for reference runs.
class OracleRisk : public EdgeRiskModel {
 public:
  OracleRisk(const Terrain& t, VehicleSpec v) : terrain_(t), vehicle_(v) {}
  double edge_risk(const LatticeEdge& e, CvarLevel alpha) override;

 private:
  const Terrain& terrain_;
  VehicleSpec vehicle_;
};

struct EdgeCost {
  double cost = 0.0;
  double risk = 0.0;
  bool feasible = true;
};

EdgeCost edge_cost(const LatticeEdge& e, EdgeRiskModel& risk, const PlanQuery& q);

struct PlanResult {
  std::vector<LatticeNode> path;
  std::vector<LatticeEdge> edges;
  double total_distance = 0.0;
  double total_cost = 0.0;
  double max_edge_cvar = 0.0;
  std::vector<double> per_edge_cvar;
};

// Best-first (A*) search over (cell, heading) states on the summed edge cost
// of feasible edges. Equal costs prefer fewer edges, then the smaller node.
// Throws NoPath when the goal is unreachable.
PlanResult plan(const LatticeGraph& g, EdgeRiskModel& risk, const PlanQuery& q);

PlanResult plan_elev_baseline(const LatticeGraph& g, const Terrain& t, const VehicleSpec& v,
                              const PlanQuery& q);

struct RolloutStats {
  int trials = 0;
  int successes = 0;
  int damages = 0;
};

inline constexpr double kDefaultDamageThreshold = 0.8;

// Trial i draws one oracle sample per path edge with seed + i; any sample at
// or above damage_threshold damages the vehicle.
RolloutStats evaluate_rollout(const Terrain& t, const PlanResult& path, const VehicleSpec& v,
                              int trials, double damage_threshold, std::uint64_t seed);

}  // namespace sparta
