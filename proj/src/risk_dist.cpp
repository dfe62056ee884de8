#include "sparta/risk_dist.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "sparta/errors.hpp"

namespace sparta {

namespace {

constexpr double kUnitMassTolerance = 1e-9;
// Slack for cumulative sums that should hit alpha exactly but carry rounding.
constexpr double kCumulativeSlack = 1e-12;

void require_same_length(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) {
    throw DimensionError("distributions must have the same, nonzero number of bins");
  }
}

void require_same_geometry(const RiskDistribution& p, const RiskDistribution& q) {
  if (!(p.geometry() == q.geometry())) throw DimensionError("bin geometries differ");
}

}  // namespace

BinGeometry::BinGeometry(int num_bins, double lower, double upper)
    : num_bins_(num_bins), lower_(lower), upper_(upper) {
  if (num_bins_ < 1) throw InvalidArgument("num_bins must be >= 1");
  if (!std::isfinite(lower_) || !std::isfinite(upper_) || !(lower_ < upper_)) {
    throw InvalidArgument("bin geometry requires finite lower < upper");
  }
}

int BinGeometry::bin_of(double value) const {
  const double t = std::floor((value - lower_) / width());
  if (!(t > 0.0)) return 0;
  if (t >= num_bins_ - 1) return num_bins_ - 1;
  return static_cast<int>(t);
}

RiskDistribution::RiskDistribution(std::vector<double> probs, BinGeometry geometry)
    : probs_(std::move(probs)), geometry_(geometry) {
  if (static_cast<int>(probs_.size()) != geometry_.num_bins()) {
    throw DimensionError("probability vector length " + std::to_string(probs_.size()) +
                         " does not match num_bins " + std::to_string(geometry_.num_bins()));
  }
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw InvalidArgument("probabilities must be finite and nonnegative");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kUnitMassTolerance) {
    throw InvalidArgument("probabilities must sum to 1, got " + std::to_string(total));
  }
}

RiskDistribution RiskDistribution::one_hot(int bin, BinGeometry geometry) {
  std::vector<double> probs(static_cast<std::size_t>(geometry.num_bins()), 0.0);
  probs.at(static_cast<std::size_t>(bin)) = 1.0;
  return RiskDistribution(std::move(probs), geometry);
}

RiskDistribution RiskDistribution::uniform(BinGeometry geometry) {
  return RiskDistribution(std::vector<double>(static_cast<std::size_t>(geometry.num_bins()),
                                              1.0 / geometry.num_bins()),
                          geometry);
}

CvarLevel::CvarLevel(double alpha) : alpha_(alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw InvalidArgument("CVaR level must lie in [0, 1), got " + std::to_string(alpha));
  }
}

RiskDistribution normalize(std::span<const double> gamma, const BinGeometry& geometry) {
  if (static_cast<int>(gamma.size()) != geometry.num_bins()) {
    throw DimensionError("concentration vector length " + std::to_string(gamma.size()) +
                         " does not match num_bins " + std::to_string(geometry.num_bins()));
  }
  double total = 0.0;
  for (double g : gamma) {
    if (!(g > 0.0) || !std::isfinite(g)) {
      throw InvalidArgument("concentrations must be finite and > 0");
    }
    total += g;
  }
  std::vector<double> probs(gamma.size());
  for (std::size_t i = 0; i < gamma.size(); ++i) probs[i] = gamma[i] / total;
  return RiskDistribution(std::move(probs), geometry);
}

double emd2(std::span<const double> p, std::span<const double> q) {
  require_same_length(p, q);
  double cp = 0.0, cq = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    cp += p[i];
    cq += q[i];
    const double d = cp - cq;
    acc += d * d;
  }
  return acc;
}

double emd2(const RiskDistribution& p, const RiskDistribution& q) {
  require_same_geometry(p, q);
  return emd2(p.probs(), q.probs());
}

std::vector<double> emd2_grad(std::span<const double> p, std::span<const double> q) {
  require_same_length(p, q);
  const std::size_t n = p.size();
  std::vector<double> diff(n);
  double cp = 0.0, cq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cp += p[i];
    cq += q[i];
    diff[i] = cp - cq;
  }
  std::vector<double> grad(n);
  double tail = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    tail += diff[k];
    grad[k] = 2.0 * tail;
  }
  return grad;
}

std::vector<double> emd2_grad(const RiskDistribution& p, const RiskDistribution& q) {
  require_same_geometry(p, q);
  return emd2_grad(p.probs(), q.probs());
}

double mean(const RiskDistribution& d) {
  double acc = 0.0;
  for (int i = 0; i < d.geometry().num_bins(); ++i) {
    acc += d.probs()[static_cast<std::size_t>(i)] * d.geometry().center(i);
  }
  return acc;
}

namespace {

// Index of the VaR bin and the cumulative mass up to and including it.
std::pair<int, double> var_index(const RiskDistribution& d, double alpha) {
  const auto& p = d.probs();
  double cumulative = 0.0;
  int last_with_mass = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    cumulative += p[i];
    if (p[i] > kMassThreshold) {
      last_with_mass = static_cast<int>(i);
      if (cumulative >= alpha - kCumulativeSlack) return {static_cast<int>(i), cumulative};
    }
  }
  // Only reachable through rounding at the very top of the distribution.
  return {last_with_mass, 1.0};
}

}  // namespace

double value_at_risk(const RiskDistribution& d, CvarLevel level) {
  return d.geometry().center(var_index(d, level.alpha()).first);
}

double cvar(const RiskDistribution& d, CvarLevel level) {
  const double alpha = level.alpha();
  const auto [idx, cumulative] = var_index(d, alpha);
  const auto& g = d.geometry();
  double tail = (cumulative - alpha) * g.center(idx);
  for (int i = idx + 1; i < g.num_bins(); ++i) {
    tail += d.probs()[static_cast<std::size_t>(i)] * g.center(i);
  }
  return tail / (1.0 - alpha);
}

void write_csv(std::ostream& os, const RiskDistribution& d) {
  os << "bin_center,prob\n";
  const auto old_precision = os.precision(17);
  for (int i = 0; i < d.geometry().num_bins(); ++i) {
    os << d.geometry().center(i) << ',' << d.probs()[static_cast<std::size_t>(i)] << '\n';
  }
  os.precision(old_precision);
}

}  // namespace sparta
