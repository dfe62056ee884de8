#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "sparta/angle_fourier.hpp"

namespace sparta {

// Uniform bins over a bounded risk variable [lower, upper).
class BinGeometry {
 public:
  BinGeometry(int num_bins = 8, double lower = 0.0, double upper = 1.0);

  int num_bins() const { return num_bins_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  double width() const { return (upper_ - lower_) / num_bins_; }
  double center(int i) const { return lower_ + (i + 0.5) * width(); }
  // Bin holding `value`; values outside the range clamp to the end bins.
  int bin_of(double value) const;

  friend bool operator==(const BinGeometry&, const BinGeometry&) = default;

 private:
  int num_bins_;
  double lower_;
  double upper_;
};

class RiskDistribution {
 public:
  // Validates nonnegativity and unit mass (1e-9).
  RiskDistribution(std::vector<double> probs, BinGeometry geometry);

  static RiskDistribution one_hot(int bin, BinGeometry geometry);
  static RiskDistribution uniform(BinGeometry geometry);

  const std::vector<double>& probs() const { return probs_; }
  const BinGeometry& geometry() const { return geometry_; }

  friend bool operator==(const RiskDistribution&, const RiskDistribution&) = default;

 private:
  std::vector<double> probs_;
  BinGeometry geometry_;
};

// alpha in [0, 1)
class CvarLevel {
 public:
  explicit CvarLevel(double alpha = 0.0);
  double alpha() const { return alpha_; }

 private:
  double alpha_;
};

inline constexpr double kMassThreshold = 1e-15;

RiskDistribution normalize(std::span<const double> gamma, const BinGeometry& geometry);

// Squared EMD with unit ground distance between adjacent bins: sum_i (P_i - Q_i)^2
// over the cumulative sums P, Q.
double emd2(const RiskDistribution& p, const RiskDistribution& q);
double emd2(std::span<const double> p, std::span<const double> q);

// d emd2 / d p_k = 2 sum_{i >= k} (P_i - Q_i), treating p as unconstrained.
std::vector<double> emd2_grad(const RiskDistribution& p, const RiskDistribution& q);
std::vector<double> emd2_grad(std::span<const double> p, std::span<const double> q);

double mean(const RiskDistribution& d);

// Smallest bin center whose cumulative mass reaches alpha. alpha = 0 selects
// the lowest bin holding mass above kMassThreshold.
double value_at_risk(const RiskDistribution& d, CvarLevel level);

// Rockafellar-Uryasev discrete CVaR. The atom at the VaR bin is weighted
// fractionally so exactly (1 - alpha) mass is averaged; CVaR(0) == mean.
double cvar(const RiskDistribution& d, CvarLevel level);

// Writes "bin_center,prob" rows (with header).
void write_csv(std::ostream& os, const RiskDistribution& d);

}  // namespace sparta
