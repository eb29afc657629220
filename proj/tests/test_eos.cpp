#include <doctest.h>

#include <cmath>
#include <random>

#include "statns/eos.hpp"
#include "statns/error.hpp"

using namespace statns;

namespace {

double E(double rho, Vec2 m, const EosParams& eos) { return energy_density(rho, m, eos).value; }

double central(auto&& f, double x, double h) {
  return (8.0 * (f(x + h) - f(x - h)) - (f(x + 2 * h) - f(x - 2 * h))) / (12.0 * h);
}

}  // namespace

TEST_CASE("pressure potential closed form") {
  const EosParams eos{2.0, 1.4};
  for (double r : {0.1, 0.5, 1.0, 3.0, 10.0}) {
    CHECK(pressure(r, eos) == doctest::Approx(2.0 * std::pow(r, 1.4)).epsilon(1e-14));
    CHECK(pressure_potential(r, eos) == doctest::Approx(2.0 * std::pow(r, 1.4) / 0.4).epsilon(1e-14));
    const double lhs = pressure_potential_derivative(r, eos) * r - pressure_potential(r, eos);
    CHECK(lhs == doctest::Approx(pressure(r, eos)).epsilon(1e-12));
    CHECK(sound_speed(r, eos) == doctest::Approx(std::sqrt(1.4 * 2.0 * std::pow(r, 0.4))));
  }
}

TEST_CASE("eos parameters are validated") {
  CHECK_THROWS_AS((EosParams{1.0, 1.0}).validate(), DomainError);
  CHECK_THROWS_AS((EosParams{0.0, 1.4}).validate(), DomainError);
  CHECK_NOTHROW((EosParams{1.0, 1.4}).validate());
}

TEST_CASE("energy convention at vacuum") {
  const EosParams eos{};
  CHECK(energy_density(0.0, {0.0, 0.0}, eos).finite);
  CHECK(E(0.0, {0.0, 0.0}, eos) == 0.0);
  CHECK_FALSE(energy_density(0.0, {0.1, 0.0}, eos).finite);
  CHECK_FALSE(energy_density(-0.1, {0.0, 0.0}, eos).finite);
  // Relative to u_ref: 1/2 rho |u - u_ref|^2 + P.
  const double e = energy_density(2.0, {3.0, 1.0}, {1.0, 0.0}, eos).value;
  CHECK(e == doctest::Approx(0.5 * 2.0 * (0.25 + 0.25) + pressure_potential(2.0, eos)));
}

TEST_CASE("relative energy is the Bregman divergence of E (finite-difference gradient)") {
  const EosParams eos{1.0, 1.4};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> R(0.2, 5.0), M(-2.0, 2.0);
  for (int k = 0; k < 200; ++k) {
    const double rho = R(rng), rt = R(rng);
    const Vec2 m{M(rng), M(rng)}, mt{M(rng), M(rng)};
    const double dr = central([&](double x) { return E(x, mt, eos); }, rt, 1e-3 * rt);
    const double d0 = central([&](double x) { return E(rt, {x, mt[1]}, eos); }, mt[0], 1e-3);
    const double d1 = central([&](double x) { return E(rt, {mt[0], x}, eos); }, mt[1], 1e-3);
    const double lin = dr * (rho - rt) + d0 * (m[0] - mt[0]) + d1 * (m[1] - mt[1]);
    const double expect = E(rho, m, eos) - E(rt, mt, eos) - lin;
    const double got = relative_energy_density(rho, m, rt, mt, eos).value;
    CHECK(got >= 0.0);
    CHECK(std::abs(got - expect) <= 1e-7 * (E(rho, m, eos) + E(rt, mt, eos) + std::abs(lin)));
    CHECK(relative_energy_density(rt, mt, rt, mt, eos).value == 0.0);
  }
}

TEST_CASE("relative energy is not symmetric") {
  const EosParams eos{1.0, 1.4};
  const double ab = relative_energy_density(0.5, {0, 0}, 2.0, {0, 0}, eos).value;
  const double ba = relative_energy_density(2.0, {0, 0}, 0.5, {0, 0}, eos).value;
  CHECK(ab != doctest::Approx(ba));
}

TEST_CASE("relative energy rejects a vacuum reference") {
  CHECK_THROWS_AS(relative_energy_density(1.0, {0, 0}, 0.0, {0, 0}, EosParams{}), DomainError);
}

TEST_CASE("quadratic lower bound holds on the band") {
  const EosParams eos{1.0, 1.4};
  const double r = 3.0;
  const double c = quadratic_lower_bound_constant(r, eos);
  REQUIRE(c > 0.0);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int k = 0; k < 5000; ++k) {
    const double rho = 1.0 / (2 * r) + (2 * r - 1.0 / (2 * r)) * U(rng);
    const double rt = 1.0 / r + (r - 1.0 / r) * U(rng);
    const double ang = 2 * M_PI * U(rng), ang2 = 2 * M_PI * U(rng);
    const Vec2 mt{r * rt * U(rng) * std::cos(ang), r * rt * U(rng) * std::sin(ang)};
    const Vec2 m{mt[0] + 3.0 * U(rng) * std::cos(ang2), mt[1] + 3.0 * U(rng) * std::sin(ang2)};
    const double lhs = relative_energy_density(rho, m, rt, mt, eos).value;
    const double q = (rho - rt) * (rho - rt) + (m[0] - mt[0]) * (m[0] - mt[0]) + (m[1] - mt[1]) * (m[1] - mt[1]);
    CHECK(lhs >= c * q * (1.0 - 1e-9));
  }
}
