#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "sparta/angle_fourier.hpp"
#include "sparta/errors.hpp"
#include "test_support.hpp"

using namespace sparta;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

constexpr double kPi = std::numbers::pi;

TEST_CASE("angles wrap into [0, 2pi)", "[angle_fourier]") {
  CHECK(AngleOfApproach(0.0).radians() == 0.0);
  CHECK_THAT(AngleOfApproach(kTwoPi).radians(), WithinAbs(0.0, 1e-15));
  CHECK_THAT(AngleOfApproach(-kPi / 2).radians(), WithinAbs(1.5 * kPi, 1e-15));
  CHECK_THAT(wrap_angle(7 * kPi).radians(), WithinAbs(kPi, 1e-12));
  CHECK_THROWS_AS(AngleOfApproach(std::nan("")), InvalidAngle);
  CHECK_THROWS_AS(AngleOfApproach(INFINITY), InvalidAngle);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e4, 1e4);
  for (int i = 0; i < 1000; ++i) {
    const double r = AngleOfApproach(u(rng)).radians();
    REQUIRE(r >= 0.0);
    REQUIRE(r < kTwoPi);
  }
}

TEST_CASE("fourier basis layout", "[angle_fourier]") {
  auto near = [](const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK_THAT(a[i], WithinAbs(b[i], 1e-12));
  };
  near(fourier_basis(AngleOfApproach(0.0), 3), {1, 1, 0, 1, 0, 1, 0});
  near(fourier_basis(AngleOfApproach(kPi / 2), 1), {1, 0, 1});
  near(fourier_basis(AngleOfApproach(kPi), 2), {1, -1, 0, 1, 0});
}

TEST_CASE("eval_raw on single harmonics", "[angle_fourier]") {
  FourierCoefficients c = FourierCoefficients::zeros(3);
  c.constant = 2.0;
  CHECK_THAT(eval_raw(c, AngleOfApproach(1.3)), WithinAbs(2.0, 1e-15));

  FourierCoefficients a1 = FourierCoefficients::zeros(3);
  a1.cosine[0] = 1.0;
  CHECK_THAT(eval_raw(a1, AngleOfApproach(kPi)), WithinAbs(-1.0, 1e-12));

  FourierCoefficients b2 = FourierCoefficients::zeros(3);
  b2.sine[1] = 1.0;
  CHECK_THAT(eval_raw(b2, AngleOfApproach(kPi / 4)), WithinAbs(1.0, 1e-12));
}

TEST_CASE("packed round trip and validation", "[angle_fourier]") {
  std::mt19937_64 rng(11);
  const FourierCoefficients c = test::random_coefficients(rng, 3, 1.0);
  CHECK(FourierCoefficients::from_packed(c.packed()) == c);
  CHECK(c.packed().size() == 7u);

  FourierCoefficients broken = FourierCoefficients::zeros(2);
  broken.sine.pop_back();
  CHECK_THROWS_AS(broken.validate(), DimensionError);
  const std::vector<double> even(6, 0.0);
  CHECK_THROWS_AS(FourierCoefficients::from_packed(even), DimensionError);
}

TEST_CASE("concentrations of simple functions", "[angle_fourier]") {
  const auto zero = FourierRiskFunction::zeros(8, 3);
  for (double g : eval_concentrations(zero, AngleOfApproach(0.7))) {
    CHECK_THAT(g, WithinAbs(std::log(2.0) + kDefaultPositivityFloor, 1e-15));
  }
  std::vector<FourierCoefficients> bins(8, FourierCoefficients::zeros(3));
  bins[2].constant = 100.0;
  const FourierRiskFunction f(bins);
  CHECK_THAT(eval_concentrations(f, AngleOfApproach(2.0))[2], WithinAbs(100.0 + kDefaultPositivityFloor, 1e-9));
}

TEST_CASE("mismatched bins are rejected", "[angle_fourier]") {
  std::vector<FourierCoefficients> bins{FourierCoefficients::zeros(3), FourierCoefficients::zeros(2)};
  CHECK_THROWS_AS(FourierRiskFunction(bins), DimensionError);
  CHECK_THROWS(FourierRiskFunction({}));
}

TEST_CASE("periodicity and positivity over seeded functions", "[angle_fourier][property]") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  for (int i = 0; i < 1000; ++i) {
    const FourierRiskFunction f = test::random_function(rng, 8, 3, 3.0);
    const double phi = u(rng);
    const auto a = eval_concentrations(f, AngleOfApproach(phi));
    const auto b = eval_concentrations(f, AngleOfApproach(phi + kTwoPi));
    for (std::size_t k = 0; k < a.size(); ++k) {
      REQUIRE_THAT(a[k], WithinAbs(b[k], 1e-9));
      REQUIRE(a[k] >= kDefaultPositivityFloor);
    }
  }
}

TEST_CASE("eval_raw is linear in the coefficients", "[angle_fourier][property]") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  for (int i = 0; i < 500; ++i) {
    const auto c1 = test::random_coefficients(rng, 5, 2.0);
    const auto c2 = test::random_coefficients(rng, 5, 2.0);
    const AngleOfApproach phi(u(rng));
    REQUIRE_THAT(eval_raw(c1 + c2, phi), WithinAbs(eval_raw(c1, phi) + eval_raw(c2, phi), 1e-10));
  }
}

TEST_CASE("lipschitz bound values", "[angle_fourier]") {
  auto single = [](auto setter) {
    std::vector<FourierCoefficients> bins(1, FourierCoefficients::zeros(3));
    setter(bins[0]);
    return lipschitz_bound(FourierRiskFunction(bins)).per_bin[0];
  };
  CHECK_THAT(single([](auto& c) { c.cosine[0] = 4.0; c.sine[0] = 3.0; }), WithinAbs(1.25, 1e-15));
  CHECK(single([](auto&) {}) == 0.0);
  CHECK_THAT(single([](auto& c) { c.cosine[1] = 1.0; }), WithinAbs(0.5, 1e-15));
  CHECK_THAT(single([](auto& c) { c.constant = 9.0; }), WithinAbs(0.0, 1e-9));
}

TEST_CASE("lipschitz bound is absolutely homogeneous", "[angle_fourier][property]") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    const FourierRiskFunction f = test::random_function(rng, 8, 3, 2.0);
    const auto base = lipschitz_bound(f).per_bin;
    for (double t : {0.0, 0.5, 3.0}) {
      std::vector<FourierCoefficients> scaled = f.bins();
      for (auto& c : scaled) {
        for (double& a : c.cosine) a *= t;
        for (double& b : c.sine) b *= t;
      }
      const auto got = lipschitz_bound(FourierRiskFunction(scaled)).per_bin;
      for (std::size_t k = 0; k < got.size(); ++k) REQUIRE_THAT(got[k], WithinAbs(t * base[k], 1e-12));
    }
  }
}

TEST_CASE("empirical slope of cos", "[angle_fourier]") {
  std::vector<FourierCoefficients> bins(1, FourierCoefficients::zeros(3));
  bins[0].cosine[0] = 1.0;
  const double s = empirical_max_slope(FourierRiskFunction(bins), 0, 10000, 1);
  CHECK(s <= 1.0 + 1e-3);
  CHECK(s >= 0.95);
}

TEST_CASE("empirical slope never exceeds the analytic derivative sup", "[angle_fourier][property]") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 100; ++i) {
    const FourierRiskFunction f = test::random_function(rng, 8, 3, 2.0);
    for (int b = 0; b < f.num_bins(); ++b) {
      const double slope = empirical_max_slope(f, b, 2000, 1000 + i);
      REQUIRE(slope <= derivative_sup_bound(f.bin(b)) + 1e-6);
      REQUIRE(slope <= 4.0 * lipschitz_bound(f).per_bin[b] + 1e-6);
    }
  }
}

TEST_CASE("softplus and sigmoid", "[angle_fourier]") {
  CHECK_THAT(softplus(0.0), WithinAbs(std::log(2.0), 1e-15));
  CHECK_THAT(softplus(800.0), WithinRel(800.0, 1e-15));
  CHECK(softplus(-800.0) >= 0.0);
  CHECK_THAT(sigmoid(0.0), WithinAbs(0.5, 1e-15));
  // derivative oracle
  for (double x : {-5.0, -0.3, 0.0, 2.0, 7.0}) {
    const double h = 1e-6;
    CHECK_THAT((softplus(x + h) - softplus(x - h)) / (2 * h), WithinAbs(sigmoid(x), 1e-8));
  }
}
