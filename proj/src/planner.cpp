#include "sparta/planner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <tuple>

#include "sparta/errors.hpp"

namespace sparta {

namespace {

struct Move {
  int dx;
  int dy;
  double phi;
};

std::vector<Move> moves_for(int headings) {
  std::vector<std::array<int, 2>> steps = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  if (headings >= 8) {
    for (auto s : std::vector<std::array<int, 2>>{{1, 1}, {-1, 1}, {-1, -1}, {1, -1}}) {
      steps.push_back(s);
    }
  }
  if (headings == 16) {
    for (auto s : std::vector<std::array<int, 2>>{
             {2, 1}, {1, 2}, {-1, 2}, {-2, 1}, {-2, -1}, {-1, -2}, {1, -2}, {2, -1}}) {
      steps.push_back(s);
    }
  }
  std::vector<Move> out;
  for (const auto& st : steps) {
    out.push_back(Move{st[0], st[1], wrap_angle(std::atan2(double(st[1]), double(st[0]))).radians()});
  }
  std::sort(out.begin(), out.end(), [](const Move& a, const Move& b) { return a.phi < b.phi; });
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a; std::hash is not stable across standard libraries.
std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

TerrainPatch edge_patch(const Terrain& t, const LatticeEdge& e) {
  return extract_patch(t, e.patch_center, e.key.side_length);
}

}  // namespace

LatticeGraph LatticeGraph::build(const Terrain& t, double cell_size, int headings,
                                 double patch_side, std::string terrain_id) {
  if (headings != 4 && headings != 8 && headings != 16) {
    throw InvalidArgument("headings must be 4, 8 or 16, got " + std::to_string(headings));
  }
  if (!(cell_size >= t.resolution())) {
    throw InvalidArgument("cell_size must be at least the terrain resolution");
  }
  if (!(patch_side > 0.0)) throw InvalidArgument("patch_side must be > 0");

  LatticeGraph g;
  g.nx_ = static_cast<int>(std::floor(t.extent_x() / cell_size + 1e-9));
  g.ny_ = static_cast<int>(std::floor(t.extent_y() / cell_size + 1e-9));
  if (g.nx_ < 1 || g.ny_ < 1) {
    throw GenerationError("terrain is smaller than one lattice cell");
  }
  g.headings_ = headings;
  g.cell_size_ = cell_size;
  g.patch_side_ = patch_side;
  g.origin_ = t.origin();
  g.terrain_id_ = std::move(terrain_id);

  const double res = t.resolution();
  const std::vector<Move> moves = moves_for(headings);

  g.adjacency_.resize(static_cast<std::size_t>(g.nx_) * g.ny_);
  for (int y = 0; y < g.ny_; ++y) {
    for (int x = 0; x < g.nx_; ++x) {
      const Cell from{x, y};
      auto& out = g.adjacency_[static_cast<std::size_t>(y) * g.nx_ + x];
      for (std::size_t h = 0; h < moves.size(); ++h) {
        const Cell to{x + moves[h].dx, y + moves[h].dy};
        if (!g.contains(to)) continue;
        const Vec2 a = g.cell_center(from);
        const Vec2 b = g.cell_center(to);
        const Vec2 mid{0.5 * (a.x + b.x) - g.origin_.x, 0.5 * (a.y + b.y) - g.origin_.y};
        LatticeEdge e;
        e.from = from;
        e.to = to;
        e.heading = static_cast<int>(h);
        e.phi = AngleOfApproach(moves[h].phi);
        e.length = std::hypot(b.x - a.x, b.y - a.y);
        e.key = PatchKey::make(g.terrain_id_, mid, res, patch_side);
        const Vec2 snapped = e.key.center();
        e.patch_center = {g.origin_.x + snapped.x, g.origin_.y + snapped.y};
        if (!patch_fits(t, e.patch_center, patch_side)) continue;
        out.push_back(e);
      }
    }
  }
  return g;
}

Vec2 LatticeGraph::cell_center(Cell c) const {
  return {origin_.x + (c.x + 0.5) * cell_size_, origin_.y + (c.y + 0.5) * cell_size_};
}

Cell LatticeGraph::nearest_cell(Vec2 p) const {
  const int x = static_cast<int>(std::floor((p.x - origin_.x) / cell_size_));
  const int y = static_cast<int>(std::floor((p.y - origin_.y) / cell_size_));
  return {std::clamp(x, 0, nx_ - 1), std::clamp(y, 0, ny_ - 1)};
}

const std::vector<LatticeEdge>& LatticeGraph::edges_from(Cell c) const {
  if (!contains(c)) throw BoundsError("cell outside the lattice");
  return adjacency_[static_cast<std::size_t>(c.y) * nx_ + c.x];
}

std::size_t LatticeGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& a : adjacency_) n += a.size();
  return n;
}

void PlanQuery::validate() const {
  if (!(risk_threshold >= 0.0 && risk_threshold <= 1.0)) {
    throw InvalidArgument("risk_threshold must lie in [0, 1]");
  }
  if (!(weights.distance >= 0.0) || !(weights.risk >= 0.0)) {
    throw InvalidArgument("cost weights must be >= 0");
  }
  if (weights.distance == 0.0 && weights.risk == 0.0) {
    throw InvalidArgument("cost weights cannot both be 0");
  }
  if (start == goal) throw InvalidArgument("start and goal must differ");
}

FunctionRisk::FunctionRisk(Compute compute, BinGeometry geometry, CoefficientCache* cache)
    : compute_(std::move(compute)), geometry_(geometry), cache_(cache) {}

double FunctionRisk::edge_risk(const LatticeEdge& e, CvarLevel alpha) {
  if (cache_ == nullptr) {
    ++computations_;
    return query_risk(compute_(e), e.phi, alpha, geometry_);
  }
  auto [f, lookup] = cache_->get_or_compute(e.key, [&] { return compute_(e); });
  if (lookup == Lookup::miss) ++computations_;
  return query_risk(f, e.phi, alpha, geometry_);
}

std::uint64_t patch_seed(const PatchKey& key, std::uint64_t base_seed) {
  std::uint64_t h = splitmix64(base_seed ^ fnv1a(key.terrain_id));
  h = splitmix64(h ^ static_cast<std::uint64_t>(key.cell_x));
  h = splitmix64(h ^ static_cast<std::uint64_t>(key.cell_y));
  return h;
}

FeatureGrid edge_features(const Terrain& t, const LatticeEdge& e, const FeatureSettings& fs) {
  return patch_features(edge_patch(t, e), fs.points_per_cell, patch_seed(e.key, fs.seed));
}

FunctionRisk::Compute model_compute(const Terrain& t, const SpartaModel& m, FeatureSettings fs) {
  if (m.head_kind != HeadKind::sparta) {
    throw HeadContractError("cached risk functions need a sparta-head model");
  }
  return [&t, &m, fs](const LatticeEdge& e) {
    return forward_function(m, edge_features(t, e, fs));
  };
}

ReinferenceRisk::ReinferenceRisk(const Terrain& t, const SpartaModel& m, FeatureSettings fs)
    : terrain_(t), model_(m), features_(fs) {}

double ReinferenceRisk::edge_risk(const LatticeEdge& e, CvarLevel alpha) {
  auto it = memo_.find(e.key);
  if (it == memo_.end()) it = memo_.emplace(e.key, edge_features(terrain_, e, features_)).first;
  return cvar(predict_distribution(model_, it->second, e.phi), alpha);
}

double ElevationRisk::edge_risk(const LatticeEdge& e, CvarLevel) {
  return max_footprint_elevation(edge_patch(terrain_, e), vehicle_);
}

double OracleRisk::edge_risk(const LatticeEdge& e, CvarLevel) {
  return risk_core(edge_patch(terrain_, e), e.phi, vehicle_);
}

EdgeCost edge_cost(const LatticeEdge& e, EdgeRiskModel& risk, const PlanQuery& q) {
  EdgeCost c;
  c.risk = risk.edge_risk(e, q.alpha);
  c.feasible = c.risk <= q.risk_threshold;
  c.cost = q.weights.distance * e.length + q.weights.risk * c.risk;
  return c;
}

PlanResult plan(const LatticeGraph& g, EdgeRiskModel& risk, const PlanQuery& q) {
  q.validate();
  if (!g.contains(q.start) || !g.contains(q.goal)) {
    throw InvalidArgument("start and goal must be lattice cells");
  }
  const int H = g.headings();
  const int slots = H + 1;  // heading H marks the start state
  const auto cell_index = [&](Cell c) { return static_cast<std::size_t>(c.y) * g.width() + c.x; };
  const auto node_index = [&](const LatticeNode& n) { return cell_index(n.cell) * slots + n.heading; };
  const std::size_t total = static_cast<std::size_t>(g.width()) * g.height() * slots;

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> cost(total, kInf);
  std::vector<int> hops(total, std::numeric_limits<int>::max());
  std::vector<std::int64_t> pred(total, -1);
  std::vector<const LatticeEdge*> via(total, nullptr);
  std::vector<char> closed(total, 0);
  std::vector<std::vector<std::optional<EdgeCost>>> memo(static_cast<std::size_t>(g.width()) *
                                                         g.height());

  const Vec2 goal_xy = g.cell_center(q.goal);
  const auto heuristic = [&](Cell c) {
    const Vec2 p = g.cell_center(c);
    return q.weights.distance * std::hypot(p.x - goal_xy.x, p.y - goal_xy.y);
  };
  const auto node_of = [&](std::size_t idx) {
    const int h = static_cast<int>(idx % slots);
    const std::size_t ci = idx / slots;
    return LatticeNode{{static_cast<int>(ci % g.width()), static_cast<int>(ci / g.width())}, h};
  };
  const auto same = [](double a, double b) {
    return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
  };

  using Entry = std::tuple<double, int, LatticeNode, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  const LatticeNode start{q.start, H};
  const std::size_t s = node_index(start);
  cost[s] = 0.0;
  hops[s] = 0;
  open.emplace(heuristic(q.start), 0, start, s);

  std::int64_t reached = -1;
  while (!open.empty()) {
    const auto [f, n_hops, node, idx] = open.top();
    open.pop();
    if (closed[idx]) continue;
    closed[idx] = 1;
    if (node.cell == q.goal) {
      reached = static_cast<std::int64_t>(idx);
      break;
    }
    const auto& edges = g.edges_from(node.cell);
    auto& cell_memo = memo[cell_index(node.cell)];
    cell_memo.resize(edges.size());
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const LatticeEdge& e = edges[k];
      const LatticeNode next{e.to, e.heading};
      const std::size_t ni = node_index(next);
      if (closed[ni]) continue;
      if (!cell_memo[k]) cell_memo[k] = edge_cost(e, risk, q);
      if (!cell_memo[k]->feasible) continue;
      const double g_new = cost[idx] + cell_memo[k]->cost;
      const int h_new = hops[idx] + 1;
      bool better = false;
      if (cost[ni] == kInf) {
        better = true;
      } else if (same(g_new, cost[ni])) {
        better = h_new < hops[ni] ||
                 (h_new == hops[ni] && pred[ni] >= 0 && node < node_of(static_cast<std::size_t>(pred[ni])));
      } else {
        better = g_new < cost[ni];
      }
      if (!better) continue;
      cost[ni] = g_new;
      hops[ni] = h_new;
      pred[ni] = static_cast<std::int64_t>(idx);
      via[ni] = &e;
      open.emplace(g_new + heuristic(e.to), h_new, next, ni);
    }
  }
  if (reached < 0) {
    throw NoPath("no feasible path from (" + std::to_string(q.start.x) + ", " +
                 std::to_string(q.start.y) + ") to (" + std::to_string(q.goal.x) + ", " +
                 std::to_string(q.goal.y) + ") under risk threshold " +
                 std::to_string(q.risk_threshold));
  }

  PlanResult r;
  for (std::int64_t i = reached; i >= 0; i = pred[static_cast<std::size_t>(i)]) {
    r.path.push_back(node_of(static_cast<std::size_t>(i)));
    if (via[static_cast<std::size_t>(i)] != nullptr) r.edges.push_back(*via[static_cast<std::size_t>(i)]);
  }
  std::reverse(r.path.begin(), r.path.end());
  std::reverse(r.edges.begin(), r.edges.end());
  for (const LatticeEdge& e : r.edges) {
    const auto& edges = g.edges_from(e.from);
    const auto& cell_memo = memo[cell_index(e.from)];
    const auto k = static_cast<std::size_t>(
        std::find_if(edges.begin(), edges.end(),
                     [&](const LatticeEdge& o) { return o.to == e.to; }) -
        edges.begin());
    const EdgeCost& c = *cell_memo[k];
    r.total_distance += e.length;
    r.total_cost += c.cost;
    r.per_edge_cvar.push_back(c.risk);
    r.max_edge_cvar = std::max(r.max_edge_cvar, c.risk);
  }
  return r;
}

PlanResult plan_elev_baseline(const LatticeGraph& g, const Terrain& t, const VehicleSpec& v,
                              const PlanQuery& q) {
  ElevationRisk risk(t, v);
  return plan(g, risk, q);
}

RolloutStats evaluate_rollout(const Terrain& t, const PlanResult& path, const VehicleSpec& v,
                              int trials, double damage_threshold, std::uint64_t seed) {
  if (trials < 1) throw InvalidArgument("trials must be >= 1");
  std::vector<double> cores;
  cores.reserve(path.edges.size());
  for (const LatticeEdge& e : path.edges) cores.push_back(risk_core(edge_patch(t, e), e.phi, v));

  RolloutStats stats;
  stats.trials = trials;
  for (int i = 0; i < trials; ++i) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(i));
    bool damaged = false;
    for (double core : cores) {
      if (perturb_risk(core, rng) >= damage_threshold) damaged = true;
    }
    if (damaged) {
      ++stats.damages;
    } else {
      ++stats.successes;
    }
  }
  return stats;
}

}  // namespace sparta
