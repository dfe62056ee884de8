#pragma once

#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace sparta {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Heading on S^1 in radians, always stored in [0, 2pi).
class AngleOfApproach {
 public:
  AngleOfApproach() = default;
  // Wraps any finite real; throws InvalidAngle otherwise.
  explicit AngleOfApproach(double radians);

  double radians() const { return radians_; }

  friend bool operator==(AngleOfApproach, AngleOfApproach) = default;

 private:
  double radians_ = 0.0;
};

AngleOfApproach wrap_angle(double x);

// Truncated Fourier series
//   f(phi) = constant + sum_k cosine[k-1] cos(k phi) + sine[k-1] sin(k phi)
struct FourierCoefficients {
  double constant = 0.0;
  std::vector<double> cosine;
  std::vector<double> sine;

  // Zero series with `max_frequency` harmonics.
  static FourierCoefficients zeros(int max_frequency);

  int max_frequency() const { return static_cast<int>(cosine.size()); }
  // Throws DimensionError / InvalidArgument on a broken invariant.
  void validate() const;

  // Packed layout [constant, a1, b1, a2, b2, ...], the same order as fourier_basis.
  std::vector<double> packed() const;
  static FourierCoefficients from_packed(std::span<const double> packed);

  friend bool operator==(const FourierCoefficients&, const FourierCoefficients&) = default;
};

FourierCoefficients operator+(const FourierCoefficients& lhs, const FourierCoefficients& rhs);

using ConcentrationVector = std::vector<double>;

inline constexpr double kDefaultPositivityFloor = 1e-6;

// One Fourier series per risk bin. Evaluating it at an angle yields the
// concentration parameters of the categorical risk distribution.
class FourierRiskFunction {
 public:
  FourierRiskFunction(std::vector<FourierCoefficients> bins,
                      double positivity_floor = kDefaultPositivityFloor);

  // All-zero function (uniform distribution at every angle).
  static FourierRiskFunction zeros(int num_bins, int max_frequency,
                                   double positivity_floor = kDefaultPositivityFloor);

  int num_bins() const { return static_cast<int>(bins_.size()); }
  int max_frequency() const { return bins_.front().max_frequency(); }
  double positivity_floor() const { return positivity_floor_; }
  const std::vector<FourierCoefficients>& bins() const { return bins_; }
  const FourierCoefficients& bin(int i) const { return bins_.at(static_cast<std::size_t>(i)); }

  friend bool operator==(const FourierRiskFunction&, const FourierRiskFunction&) = default;

 private:
  std::vector<FourierCoefficients> bins_;
  double positivity_floor_;
};

// [1, cos phi, sin phi, cos 2phi, sin 2phi, ..., cos n phi, sin n phi]
std::vector<double> fourier_basis(AngleOfApproach phi, int n);
// Writes the same values into `out`, which must hold 2n+1 entries.
void fourier_basis_into(AngleOfApproach phi, int n, std::span<double> out);

double eval_raw(const FourierCoefficients& coeffs, AngleOfApproach phi);

// Numerically stable ln(1 + e^x) and its derivative.
double softplus(double x);
double sigmoid(double x);

ConcentrationVector eval_concentrations(const FourierRiskFunction& f, AngleOfApproach phi);

struct LipschitzBound {
  std::vector<double> per_bin;
};

// Per bin (1/4) * sum_k k * sqrt(a_k^2 + b_k^2) on the raw series.
// softplus' <= 1, so the raw-series constant also bounds the concentrations.
LipschitzBound lipschitz_bound(const FourierRiskFunction& f);

// Tight supremum of |d/dphi raw(phi)|: sum_k k * sqrt(a_k^2 + b_k^2).
double derivative_sup_bound(const FourierCoefficients& coeffs);

inline constexpr double kSlopeProbeDelta = 1e-4;

// Max secant slope |raw(phi+d) - raw(phi)| / d over `samples` seeded angles.
double empirical_max_slope(const FourierRiskFunction& f, int bin, int samples, std::uint64_t seed);

}  // namespace sparta
