#pragma once

#include <atomic>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "sparta/angle_fourier.hpp"
#include "sparta/risk_dist.hpp"
#include "sparta/terrain.hpp"

namespace sparta {

// Patch identity with the center snapped to the terrain grid, so keys built
// from float centers of the same aligned patch compare equal.
struct PatchKey {
  std::string terrain_id;
  std::int64_t cell_x = 0;
  std::int64_t cell_y = 0;
  double resolution = 1.0;
  double side_length = 1.0;

  static PatchKey make(std::string terrain_id, Vec2 center, double resolution, double side_length);
  Vec2 center() const;

  auto operator<=>(const PatchKey&) const = default;
};

enum class Lookup { hit, miss };

struct CacheStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t stores = 0;
};

// Compute-once store of Fourier risk functions per patch. Lookups may run
// concurrently; concurrent misses on one key run `compute` exactly once and
// every caller receives that result. A failed compute stores nothing.
class CoefficientCache {
 public:
  static constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

  explicit CoefficientCache(std::size_t max_entries = kUnbounded) : max_entries_(max_entries) {}

  CoefficientCache(const CoefficientCache& other);
  CoefficientCache& operator=(const CoefficientCache&) = delete;

  using Compute = std::function<FourierRiskFunction()>;

  // Throws CacheFull instead of evicting when a miss would exceed max_entries.
  std::pair<FourierRiskFunction, Lookup> get_or_compute(const PatchKey& key, const Compute& compute);

  // Stores directly, e.g. while loading; does not touch the counters.
  void insert(const PatchKey& key, FourierRiskFunction f);
  std::optional<FourierRiskFunction> find(const PatchKey& key) const;

  std::size_t size() const;
  std::size_t max_entries() const { return max_entries_; }
  CacheStats stats() const;
  // Completed entries in key order.
  std::vector<std::pair<PatchKey, FourierRiskFunction>> entries() const;

  friend bool operator==(const CoefficientCache& a, const CoefficientCache& b) {
    return a.entries() == b.entries();
  }

 private:
  std::size_t max_entries_;
  mutable std::shared_mutex mutex_;
  std::map<PatchKey, std::shared_future<FourierRiskFunction>> entries_;
  std::atomic<std::uint64_t> hits_{0};
  std::atomic<std::uint64_t> misses_{0};
  std::atomic<std::uint64_t> stores_{0};
};

inline constexpr int kCacheFormatVersion = 1;

void save(const CoefficientCache& cache, const std::filesystem::path& path);
// Throws FormatError on an unreadable, corrupt, or wrong-version file.
CoefficientCache load_cache(const std::filesystem::path& path);

// cvar(normalize(eval_concentrations(f, phi)), alpha); no model inference.
double query_risk(const FourierRiskFunction& f, AngleOfApproach phi, CvarLevel alpha,
                  const BinGeometry& geometry);

}  // namespace sparta
