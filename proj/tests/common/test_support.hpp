#pragma once

// Shared generators and reference implementations for the unit tests. The
// references here are written independently of the library code.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "sparta/angle_fourier.hpp"
#include "sparta/risk_dist.hpp"
#include "sparta/terrain.hpp"

namespace sparta::test {

inline FourierCoefficients random_coefficients(std::mt19937_64& rng, int n, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  FourierCoefficients c = FourierCoefficients::zeros(n);
  c.constant = u(rng);
  for (int k = 0; k < n; ++k) {
    c.cosine[k] = u(rng);
    c.sine[k] = u(rng);
  }
  return c;
}

inline FourierRiskFunction random_function(std::mt19937_64& rng, int bins, int n, double scale) {
  std::vector<FourierCoefficients> b;
  for (int i = 0; i < bins; ++i) b.push_back(random_coefficients(rng, n, scale));
  return FourierRiskFunction(b);
}

inline RiskDistribution random_distribution(std::mt19937_64& rng, const BinGeometry& g,
                                            double zero_chance = 0.2) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(static_cast<std::size_t>(g.num_bins()));
  double total = 0.0;
  for (double& v : p) {
    v = u(rng) < zero_chance ? 0.0 : u(rng);
    total += v;
  }
  if (total == 0.0) {
    p[0] = 1.0;
    total = 1.0;
  }
  for (double& v : p) v /= total;
  return RiskDistribution(p, g);
}

// CVaR as (1/(1-a)) * integral over u in [a, 1] of the quantile function,
// integrated exactly over the piecewise-constant quantile steps.
inline double cvar_by_quantile_integral(const std::vector<double>& probs, const BinGeometry& g,
                                        double alpha) {
  double acc = 0.0;
  double lo = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double hi = lo + probs[i];
    const double overlap = std::max(0.0, std::min(hi, 1.0) - std::max(lo, alpha));
    acc += overlap * g.center(static_cast<int>(i));
    lo = hi;
  }
  return acc / (1.0 - alpha);
}

// Terrain with a rectangular raised block [x0, x1) x [y0, y1) of height h on
// vertices (world coordinates, origin at 0).
inline Terrain block_terrain(int rows, int cols, double res, double x0, double x1, double y0,
                             double y1, double h) {
  Terrain t = Terrain::flat(rows, cols, res);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double x = c * res;
      const double y = r * res;
      if (x >= x0 - 1e-9 && x < x1 - 1e-9 && y >= y0 - 1e-9 && y < y1 - 1e-9) t.at(r, c) = h;
    }
  }
  return t;
}

}  // namespace sparta::test
