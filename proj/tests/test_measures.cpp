#include <doctest.h>

#include <cmath>
#include <random>

#include "statns/error.hpp"
#include "statns/measures.hpp"

using namespace statns;

namespace {

DataPoint uniform_point(const Grid& g, double rho) {
  FieldState s(g.cell_count());
  std::fill(s.rho.begin(), s.rho.end(), rho);
  return make_data_point(g, s, wall_boundary(g), EosParams{});
}

}  // namespace

TEST_CASE("dirac and mixture weights") {
  const Grid g = build_grid(1, {1, 1}, {8, 1});
  const Ensemble a = dirac(g, uniform_point(g, 1.0));
  const Ensemble b = dirac(g, uniform_point(g, 2.0));
  CHECK(a.size() == 1);
  CHECK(a.weights[0] == 1.0);
  CHECK(a.atoms[0].energy == doctest::Approx(pressure_potential(1.0, EosParams{})));
  const Ensemble m = mixture({a, b}, {0.25, 0.75});
  CHECK(m.size() == 2);
  CHECK(m.weights[1] == 0.75);
  CHECK_NOTHROW(m.validate());
  CHECK_THROWS_AS(mixture({a, b}, {0.5, 0.6}), PreconditionError);
  Ensemble bad = m;
  bad.weights = {1.2, -0.2};
  CHECK_THROWS_AS(bad.validate(), PreconditionError);
}

TEST_CASE("infinite energy data is rejected") {
  const Grid g = build_grid(1, {1, 1}, {8, 1});
  FieldState s(g.cell_count());
  s.mom[2] = {1.0, 0.0};
  CHECK_THROWS_AS(make_data_point(g, s, wall_boundary(g), EosParams{}), PreconditionError);
}

TEST_CASE("expectations") {
  const Grid g = build_grid(1, {1, 1}, {16, 1});
  const SpectralBasis basis = build_spectral_basis(g, 4);
  const Ensemble m = mixture({dirac(g, uniform_point(g, 1.0)), dirac(g, uniform_point(g, 3.0))}, {0.5, 0.5});
  CHECK(expectation(m, constant_observable(2.5), basis) == doctest::Approx(2.5));
  const double e = 0.5 * (m.atoms[0].energy + m.atoms[1].energy);
  CHECK(expectation(m, energy_observable(), basis) == doctest::Approx(e));
  // Linear mass observable: weighted first projection coefficient.
  const Observable lin = mass_observable({1.0, 0.0, 0.0, 0.0}, {0.0, 0.0, 0.0, 0.0});
  const double r0 = observe(m.atoms[0].state, 0.0, basis).r[0];
  const double r1 = observe(m.atoms[1].state, 0.0, basis).r[0];
  CHECK(r1 == doctest::Approx(3.0 * r0));
  CHECK(expectation(m, lin, basis) == doctest::Approx(0.5 * (r0 + r1)));
}

TEST_CASE("hat function") {
  const auto psi = hat_function(1.0, 3.0);
  CHECK(psi(0.5) == 0.0);
  CHECK(psi(1.0) == 0.0);
  CHECK(psi(2.0) == doctest::Approx(1.0));
  CHECK(psi(2.5) == doctest::Approx(0.5));
  CHECK(psi(3.0) == 0.0);
}

TEST_CASE("uniform01 maps 53 bits onto [0, 1)") {
  CHECK(uniform01(0) == 0.0);
  CHECK(uniform01(~std::uint64_t{0}) < 1.0);
  CHECK(uniform01(std::uint64_t{1} << 63) == 0.5);
  std::mt19937_64 rng(5);
  double mean = 0.0;
  for (int k = 0; k < 20000; ++k) mean += uniform01(rng());
  CHECK(mean / 20000 == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("fourier sampler respects its bounds and seed") {
  for (const Grid& g : {build_grid(1, {1, 1}, {32, 1}), build_grid(2, {1, 1}, {12, 12})}) {
    FourierSampler s;
    s.rho_mean = 1.3;
    s.rho_amplitude = 0.25;
    s.mom_amplitude = 0.1;
    s.seed = 42;
    const auto bd = wall_boundary(g);
    const Ensemble a = sample_fourier(g, bd, s, 6, EosParams{});
    const Ensemble b = sample_fourier(g, bd, s, 6, EosParams{});
    CHECK(a.size() == 6);
    CHECK_NOTHROW(a.validate());
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a.atoms[k].state == b.atoms[k].state);
      CHECK(a.weights[k] == doctest::Approx(1.0 / 6));
      for (std::size_t c = 0; c < g.cell_count(); ++c) {
        CHECK(std::abs(a.atoms[k].state.rho[c] - 1.3) <= 0.25 * 1.3 + 1e-12);
        CHECK(std::abs(a.atoms[k].state.mom[c][0]) <= 0.1 + 1e-12);
        CHECK(std::abs(a.atoms[k].state.mom[c][1]) <= 0.1 + 1e-12);
      }
    }
    CHECK_FALSE(a.atoms[0].state == a.atoms[1].state);
    s.seed = 43;
    CHECK_FALSE(sample_fourier(g, bd, s, 6, EosParams{}).atoms[0].state == a.atoms[0].state);
  }
}

TEST_CASE("pushforward of a dirac equals the single trajectory") {
  const Grid g = build_grid(1, {1, 1}, {24, 1});
  FourierSampler s;
  s.seed = 7;
  const Ensemble one = sample_fourier(g, wall_boundary(g), s, 1, EosParams{});
  SolverConfig cfg;
  const double times[] = {0.0, 0.25};
  PropagateOptions po;
  po.atom_dt = resolve_atom_dt(one, cfg, times);
  const Trajectory tr = integrate(g, one.atoms[0].state, one.atoms[0].bd, cfg, times);
  const Ensemble pushed = pushforward(one, 0.25, cfg, po);
  CHECK(pushed.atoms[0].state == tr.states[1]);
  CHECK(pushed.atoms[0].energy == doctest::Approx(output_energy(tr, 1, one.atoms[0].bd, cfg.eos)));
  CHECK(semigroup_residual(one, 0.1, 0.15, cfg, po) <= 1e-3);
}
