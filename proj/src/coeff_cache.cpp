#include "sparta/coeff_cache.hpp"

#include <chrono>
#include <cmath>
#include <mutex>

#include "sparta/errors.hpp"
#include "sparta/io.hpp"

namespace sparta {

PatchKey PatchKey::make(std::string terrain_id, Vec2 center, double resolution,
                        double side_length) {
  if (!(resolution > 0.0)) throw InvalidArgument("patch key resolution must be > 0");
  return PatchKey{std::move(terrain_id), std::llround(center.x / resolution),
                  std::llround(center.y / resolution), resolution, side_length};
}

Vec2 PatchKey::center() const {
  return {static_cast<double>(cell_x) * resolution, static_cast<double>(cell_y) * resolution};
}

CoefficientCache::CoefficientCache(const CoefficientCache& other)
    : max_entries_(other.max_entries_) {
  std::shared_lock lock(other.mutex_);
  entries_ = other.entries_;
  hits_ = other.hits_.load();
  misses_ = other.misses_.load();
  stores_ = other.stores_.load();
}

std::pair<FourierRiskFunction, Lookup> CoefficientCache::get_or_compute(const PatchKey& key,
                                                                        const Compute& compute) {
  std::shared_future<FourierRiskFunction> pending;
  {
    std::shared_lock lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) pending = it->second;
  }
  if (!pending.valid()) {
    std::promise<FourierRiskFunction> promise;
    {
      std::unique_lock lock(mutex_);
      if (auto it = entries_.find(key); it != entries_.end()) {
        pending = it->second;
      } else {
        misses_.fetch_add(1);
        if (entries_.size() >= max_entries_) {
          throw CacheFull("coefficient cache is full (" + std::to_string(max_entries_) +
                          " entries)");
        }
        entries_.emplace(key, promise.get_future().share());
      }
    }
    if (!pending.valid()) {
      try {
        FourierRiskFunction f = compute();
        promise.set_value(f);
        stores_.fetch_add(1);
        return {std::move(f), Lookup::miss};
      } catch (...) {
        promise.set_exception(std::current_exception());
        std::unique_lock lock(mutex_);
        entries_.erase(key);
        throw;
      }
    }
  }
  hits_.fetch_add(1);
  return {pending.get(), Lookup::hit};
}

void CoefficientCache::insert(const PatchKey& key, FourierRiskFunction f) {
  std::promise<FourierRiskFunction> promise;
  promise.set_value(std::move(f));
  std::unique_lock lock(mutex_);
  if (entries_.size() >= max_entries_ && !entries_.contains(key)) {
    throw CacheFull("coefficient cache is full (" + std::to_string(max_entries_) + " entries)");
  }
  entries_.insert_or_assign(key, promise.get_future().share());
}

std::optional<FourierRiskFunction> CoefficientCache::find(const PatchKey& key) const {
  std::shared_future<FourierRiskFunction> pending;
  {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    pending = it->second;
  }
  return pending.get();
}

std::size_t CoefficientCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

CacheStats CoefficientCache::stats() const {
  return {hits_.load(), misses_.load(), stores_.load()};
}

std::vector<std::pair<PatchKey, FourierRiskFunction>> CoefficientCache::entries() const {
  std::vector<std::pair<PatchKey, FourierRiskFunction>> out;
  std::shared_lock lock(mutex_);
  for (const auto& [key, pending] : entries_) {
    if (pending.wait_for(std::chrono::seconds(0)) != std::future_status::ready) continue;
    out.emplace_back(key, pending.get());
  }
  return out;
}

void save(const CoefficientCache& cache, const std::filesystem::path& path) {
  io::Json entries = io::Json::array();
  for (const auto& [key, f] : cache.entries()) {
    entries.push_back({{"key", io::to_json(key)}, {"function", io::to_json(f)}});
  }
  io::write_json_file(path, {{"version", kCacheFormatVersion}, {"entries", std::move(entries)}});
}

CoefficientCache load_cache(const std::filesystem::path& path) {
  const io::Json j = io::read_json_file(path);
  io::check_version(j, "coefficient cache " + path.string());
  CoefficientCache cache;
  try {
    for (const auto& e : j.at("entries")) {
      cache.insert(io::key_from_json(e.at("key")), io::function_from_json(e.at("function")));
    }
  } catch (const io::Json::exception& e) {
    throw FormatError("corrupt coefficient cache " + path.string() + ": " + e.what());
  }
  return cache;
}

double query_risk(const FourierRiskFunction& f, AngleOfApproach phi, CvarLevel alpha,
                  const BinGeometry& geometry) {
  return cvar(normalize(eval_concentrations(f, phi), geometry), alpha);
}

}  // namespace sparta
