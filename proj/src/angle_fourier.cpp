#include "sparta/angle_fourier.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "sparta/errors.hpp"

namespace sparta {

AngleOfApproach::AngleOfApproach(double radians) {
  if (!std::isfinite(radians)) {
    throw InvalidAngle("angle must be finite, got " + std::to_string(radians));
  }
  double r = std::fmod(radians, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  // -tiny + 2pi rounds to 2pi
  if (r >= kTwoPi) r = 0.0;
  radians_ = r;
}

AngleOfApproach wrap_angle(double x) { return AngleOfApproach(x); }

FourierCoefficients FourierCoefficients::zeros(int max_frequency) {
  if (max_frequency < 1) throw InvalidArgument("max_frequency must be >= 1");
  FourierCoefficients c;
  c.cosine.assign(static_cast<std::size_t>(max_frequency), 0.0);
  c.sine.assign(static_cast<std::size_t>(max_frequency), 0.0);
  return c;
}

void FourierCoefficients::validate() const {
  if (cosine.empty()) throw InvalidArgument("max_frequency must be >= 1");
  if (cosine.size() != sine.size()) {
    throw DimensionError("cosine and sine sequences differ in length");
  }
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::isfinite(constant) || !std::all_of(cosine.begin(), cosine.end(), finite) ||
      !std::all_of(sine.begin(), sine.end(), finite)) {
    throw InvalidArgument("Fourier coefficients must be finite");
  }
}

std::vector<double> FourierCoefficients::packed() const {
  std::vector<double> out;
  out.reserve(1 + 2 * cosine.size());
  out.push_back(constant);
  for (std::size_t k = 0; k < cosine.size(); ++k) {
    out.push_back(cosine[k]);
    out.push_back(sine[k]);
  }
  return out;
}

FourierCoefficients FourierCoefficients::from_packed(std::span<const double> packed) {
  if (packed.size() < 3 || packed.size() % 2 == 0) {
    throw DimensionError("packed Fourier coefficients must have length 2n+1, n >= 1");
  }
  const int n = static_cast<int>((packed.size() - 1) / 2);
  FourierCoefficients c = zeros(n);
  c.constant = packed[0];
  for (int k = 0; k < n; ++k) {
    c.cosine[k] = packed[1 + 2 * k];
    c.sine[k] = packed[2 + 2 * k];
  }
  return c;
}

FourierCoefficients operator+(const FourierCoefficients& lhs, const FourierCoefficients& rhs) {
  if (lhs.max_frequency() != rhs.max_frequency()) {
    throw DimensionError("cannot add Fourier series of different max_frequency");
  }
  FourierCoefficients out = lhs;
  out.constant += rhs.constant;
  for (std::size_t k = 0; k < out.cosine.size(); ++k) {
    out.cosine[k] += rhs.cosine[k];
    out.sine[k] += rhs.sine[k];
  }
  return out;
}

FourierRiskFunction::FourierRiskFunction(std::vector<FourierCoefficients> bins,
                                         double positivity_floor)
    : bins_(std::move(bins)), positivity_floor_(positivity_floor) {
  if (bins_.empty()) throw InvalidArgument("a risk function needs at least one bin");
  if (!(positivity_floor_ > 0.0) || !std::isfinite(positivity_floor_)) {
    throw InvalidArgument("positivity floor must be finite and > 0");
  }
  const int n = bins_.front().max_frequency();
  for (const auto& b : bins_) {
    b.validate();
    if (b.max_frequency() != n) throw DimensionError("bins must share max_frequency");
  }
}

FourierRiskFunction FourierRiskFunction::zeros(int num_bins, int max_frequency,
                                               double positivity_floor) {
  if (num_bins < 1) throw InvalidArgument("num_bins must be >= 1");
  return FourierRiskFunction(
      std::vector<FourierCoefficients>(static_cast<std::size_t>(num_bins),
                                       FourierCoefficients::zeros(max_frequency)),
      positivity_floor);
}

void fourier_basis_into(AngleOfApproach phi, int n, std::span<double> out) {
  if (n < 1) throw InvalidArgument("max frequency must be >= 1");
  if (out.size() != static_cast<std::size_t>(2 * n + 1)) {
    throw DimensionError("basis buffer must hold 2n+1 values");
  }
  const double x = phi.radians();
  out[0] = 1.0;
  for (int k = 1; k <= n; ++k) {
    out[2 * k - 1] = std::cos(k * x);
    out[2 * k] = std::sin(k * x);
  }
}

std::vector<double> fourier_basis(AngleOfApproach phi, int n) {
  if (n < 1) throw InvalidArgument("max frequency must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(2 * n + 1));
  fourier_basis_into(phi, n, out);
  return out;
}

double eval_raw(const FourierCoefficients& coeffs, AngleOfApproach phi) {
  const double x = phi.radians();
  double acc = coeffs.constant;
  for (std::size_t k = 0; k < coeffs.cosine.size(); ++k) {
    const double kx = static_cast<double>(k + 1) * x;
    acc += coeffs.cosine[k] * std::cos(kx) + coeffs.sine[k] * std::sin(kx);
  }
  return acc;
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

ConcentrationVector eval_concentrations(const FourierRiskFunction& f, AngleOfApproach phi) {
  ConcentrationVector gamma;
  gamma.reserve(f.bins().size());
  for (const auto& b : f.bins()) {
    gamma.push_back(softplus(eval_raw(b, phi)) + f.positivity_floor());
  }
  return gamma;
}

double derivative_sup_bound(const FourierCoefficients& coeffs) {
  double acc = 0.0;
  for (std::size_t k = 0; k < coeffs.cosine.size(); ++k) {
    acc += static_cast<double>(k + 1) * std::hypot(coeffs.cosine[k], coeffs.sine[k]);
  }
  return acc;
}

LipschitzBound lipschitz_bound(const FourierRiskFunction& f) {
  LipschitzBound out;
  out.per_bin.reserve(f.bins().size());
  for (const auto& b : f.bins()) out.per_bin.push_back(0.25 * derivative_sup_bound(b));
  return out;
}

double empirical_max_slope(const FourierRiskFunction& f, int bin, int samples,
                           std::uint64_t seed) {
  if (samples < 2) throw InvalidArgument("empirical_max_slope needs samples >= 2");
  const auto& coeffs = f.bin(bin);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  double best = 0.0;
  for (int s = 0; s < samples; ++s) {
    const double phi = angle(rng);
    const double lo = eval_raw(coeffs, AngleOfApproach(phi));
    const double hi = eval_raw(coeffs, AngleOfApproach(phi + kSlopeProbeDelta));
    best = std::max(best, std::abs(hi - lo) / kSlopeProbeDelta);
  }
  return best;
}

}  // namespace sparta
