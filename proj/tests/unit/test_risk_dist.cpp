#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "sparta/errors.hpp"
#include "sparta/risk_dist.hpp"
#include "test_support.hpp"

using namespace sparta;
using Catch::Matchers::WithinAbs;

namespace {

const BinGeometry g8(8, 0.0, 1.0);

std::vector<double> cdf(const std::vector<double>& p) {
  std::vector<double> c(p.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) c[i] = s += p[i];
  return c;
}

}  // namespace

TEST_CASE("bin geometry", "[risk_dist]") {
  CHECK(g8.width() == 0.125);
  CHECK(g8.center(0) == 0.0625);
  CHECK(g8.center(7) == 0.9375);
  CHECK(g8.bin_of(0.0) == 0);
  CHECK(g8.bin_of(0.125) == 1);
  CHECK(g8.bin_of(1.0) == 7);
  CHECK(g8.bin_of(-3.0) == 0);
  CHECK_THROWS_AS(BinGeometry(0, 0.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(BinGeometry(4, 1.0, 1.0), InvalidArgument);
}

TEST_CASE("distribution validation", "[risk_dist]") {
  CHECK_THROWS(RiskDistribution({0.5, 0.6, 0, 0, 0, 0, 0, 0}, g8));
  CHECK_THROWS(RiskDistribution({-0.1, 1.1, 0, 0, 0, 0, 0, 0}, g8));
  CHECK_THROWS_AS(RiskDistribution({1.0}, g8), DimensionError);
}

TEST_CASE("normalize examples", "[risk_dist]") {
  const auto u = normalize(std::vector<double>(8, 1.0), g8);
  for (double p : u.probs()) CHECK(p == 0.125);

  std::vector<double> gamma(8, kDefaultPositivityFloor);
  gamma[0] = 3.0;
  gamma[1] = 1.0;
  const auto d = normalize(gamma, g8);
  CHECK_THAT(d.probs()[0], WithinAbs(0.75, 1e-4));
  CHECK_THAT(d.probs()[1], WithinAbs(0.25, 1e-4));
  for (int i = 2; i < 8; ++i) CHECK(d.probs()[i] < 1e-5);

  CHECK_THROWS(normalize(std::vector<double>{1.0, 0.0, -1.0, 1, 1, 1, 1, 1}, g8));
}

TEST_CASE("normalize lands on the simplex and ignores scale", "[risk_dist][property]") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(1e-6, 50.0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> gamma(8);
    for (double& v : gamma) v = u(rng);
    const auto d = normalize(gamma, g8);
    double s = 0.0;
    for (double p : d.probs()) {
      REQUIRE(p >= 0.0);
      s += p;
    }
    REQUIRE_THAT(s, WithinAbs(1.0, 1e-12));
    for (double t : {0.1, 1.0, 10.0}) {
      std::vector<double> scaled = gamma;
      for (double& v : scaled) v *= t;
      const auto e = normalize(scaled, g8);
      for (int k = 0; k < 8; ++k) REQUIRE_THAT(e.probs()[k], WithinAbs(d.probs()[k], 1e-12));
    }
  }
}

TEST_CASE("emd2 examples", "[risk_dist]") {
  const auto a = RiskDistribution::one_hot(0, g8);
  CHECK(emd2(a, a) == 0.0);
  CHECK(emd2(a, RiskDistribution::one_hot(1, g8)) == 1.0);
  CHECK(emd2(a, RiskDistribution::one_hot(7, g8)) == 7.0);
  CHECK_THROWS_AS(emd2(a, RiskDistribution::one_hot(0, BinGeometry(4, 0, 1))), DimensionError);
}

TEST_CASE("emd2 metric properties against a CDF oracle", "[risk_dist][property]") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 500; ++i) {
    const auto p = test::random_distribution(rng, g8);
    const auto q = test::random_distribution(rng, g8);
    const auto cp = cdf(p.probs());
    const auto cq = cdf(q.probs());
    double expect = 0.0;
    for (std::size_t k = 0; k < cp.size(); ++k) expect += (cp[k] - cq[k]) * (cp[k] - cq[k]);
    REQUIRE_THAT(emd2(p, q), WithinAbs(expect, 1e-12));
    REQUIRE(emd2(p, q) == emd2(q, p));
    REQUIRE(emd2(p, q) >= 0.0);
    REQUIRE(emd2(p, p) == 0.0);
    if (p.probs() != q.probs()) REQUIRE(emd2(p, q) > 0.0);
  }
}

TEST_CASE("emd2 gradient", "[risk_dist]") {
  std::mt19937_64 rng(3);
  const auto p = test::random_distribution(rng, g8);
  for (double v : emd2_grad(p, p)) CHECK(v == 0.0);

  const BinGeometry g2(2, 0.0, 1.0);
  const auto grad = emd2_grad(RiskDistribution({1.0, 0.0}, g2), RiskDistribution({0.0, 1.0}, g2));
  // P - Q = [1, 0]: d/dp0 = 2 (1 + 0), d/dp1 = 2 * 0
  CHECK(grad[0] == 2.0);
  CHECK(grad[1] == 0.0);
}

TEST_CASE("emd2 gradient matches central differences", "[risk_dist][property]") {
  std::mt19937_64 rng(8);
  const double h = 1e-6;
  for (int i = 0; i < 200; ++i) {
    const auto p = test::random_distribution(rng, g8, 0.0);
    const auto q = test::random_distribution(rng, g8);
    const auto grad = emd2_grad(p.probs(), q.probs());
    for (int k = 0; k < 8; ++k) {
      std::vector<double> up = p.probs(), dn = p.probs();
      up[k] += h;
      dn[k] -= h;
      const double fd = (emd2(up, q.probs()) - emd2(dn, q.probs())) / (2 * h);
      const double err = std::abs(fd - grad[k]) / std::max(1.0, std::abs(grad[k]));
      REQUIRE(err <= 1e-5);
    }
  }
}

TEST_CASE("mean and value at risk", "[risk_dist]") {
  const auto u = RiskDistribution::uniform(g8);
  CHECK_THAT(mean(u), WithinAbs(0.5, 1e-15));
  CHECK(mean(RiskDistribution::one_hot(0, g8)) == 0.0625);
  CHECK(mean(RiskDistribution::one_hot(7, g8)) == 0.9375);
  CHECK(value_at_risk(u, CvarLevel(0.5)) == 0.4375);
  CHECK(value_at_risk(u, CvarLevel(0.0)) == 0.0625);
  for (int k = 0; k < 8; ++k) {
    for (double a : {0.0, 0.3, 0.9}) CHECK(value_at_risk(RiskDistribution::one_hot(k, g8), CvarLevel(a)) == g8.center(k));
  }
  const RiskDistribution skip({0, 0, 0.5, 0.5, 0, 0, 0, 0}, g8);
  CHECK(value_at_risk(skip, CvarLevel(0.0)) == g8.center(2));
}

TEST_CASE("cvar level validation", "[risk_dist]") {
  CHECK_THROWS_AS(CvarLevel(1.0), InvalidArgument);
  CHECK_THROWS_AS(CvarLevel(-0.1), InvalidArgument);
  CHECK_NOTHROW(CvarLevel(0.999));
}

TEST_CASE("cvar on the uniform distribution", "[risk_dist]") {
  const auto u = RiskDistribution::uniform(g8);
  CHECK_THAT(cvar(u, CvarLevel(0.0)), WithinAbs(0.5, 1e-12));
  CHECK_THAT(cvar(u, CvarLevel(0.875)), WithinAbs(0.9375, 1e-12));
  // Top quarter of the mass: bins 6 and 7, (0.8125 + 0.9375) / 2.
  CHECK_THAT(cvar(u, CvarLevel(0.75)), WithinAbs(0.875, 1e-12));
  CHECK_THAT(cvar(u, CvarLevel(0.75)),
             WithinAbs(test::cvar_by_quantile_integral(u.probs(), g8, 0.75), 1e-12));
}

TEST_CASE("cvar against the quantile-integral oracle", "[risk_dist][property]") {
  std::mt19937_64 rng(1234);
  for (int i = 0; i < 1000; ++i) {
    const auto d = test::random_distribution(rng, g8);
    REQUIRE_THAT(cvar(d, CvarLevel(0.0)), WithinAbs(mean(d), 1e-12));
    double prev = -1.0;
    for (int k = 0; k <= 9; ++k) {
      const double a = 0.1 * k;
      const double c = cvar(d, CvarLevel(a));
      REQUIRE_THAT(c, WithinAbs(test::cvar_by_quantile_integral(d.probs(), g8, a), 1e-12));
      REQUIRE(c >= prev - 1e-12);
      REQUIRE(c >= mean(d) - 1e-12);
      prev = c;
    }
  }
}

TEST_CASE("distribution csv", "[risk_dist]") {
  std::ostringstream os;
  write_csv(os, RiskDistribution::one_hot(1, BinGeometry(2, 0.0, 1.0)));
  CHECK(os.str() == "bin_center,prob\n0.25,0\n0.75,1\n");
}
