#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "statns/error.hpp"
#include "statns/transport.hpp"

using namespace statns;

namespace {

CostMatrix random_cost(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 5.0);
  std::vector<double> v(r * c);
  for (auto& x : v) x = U(rng);
  return CostMatrix::from_dense(r, c, v);
}

// Birkhoff: with uniform equal-size marginals an optimal plan is a permutation.
double brute_force(const CostMatrix& c) {
  std::vector<std::size_t> p(c.rows);
  std::iota(p.begin(), p.end(), 0);
  double best = 1e300;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < c.rows; ++i) s += c.at(i, p[i]);
    best = std::min(best, s / c.rows);
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

std::vector<double> simplex(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.1, 1.0);
  std::vector<double> w(n);
  double s = 0.0;
  for (auto& x : w) s += (x = U(rng));
  for (auto& x : w) x /= s;
  return w;
}

Ensemble wave_ensemble(const Grid& g, std::uint64_t seed, std::size_t n) {
  FourierSampler s;
  s.seed = seed;
  return sample_fourier(g, wall_boundary(g), s, n, EosParams{});
}

}  // namespace

TEST_CASE("exact transport matches permutation brute force") {
  std::mt19937_64 rng(11);
  for (std::size_t n = 1; n <= 6; ++n) {
    for (int rep = 0; rep < 5; ++rep) {
      const CostMatrix c = random_cost(n, n, rng);
      const std::vector<double> w(n, 1.0 / n);
      const auto r = we_distance_exact(w, w, c);
      CHECK(r.value == doctest::Approx(brute_force(c)).epsilon(1e-12));
      CHECK(r.plan.marginal_violation(w, w) <= 1e-14);
    }
  }
}

TEST_CASE("exact transport is certified by its duals on rectangular problems") {
  std::mt19937_64 rng(12);
  for (auto [r, cc] : {std::pair<std::size_t, std::size_t>{3, 5}, {7, 2}, {4, 4}, {9, 6}}) {
    const CostMatrix c = random_cost(r, cc, rng);
    const auto a = simplex(r, rng), b = simplex(cc, rng);
    const auto res = we_distance_exact(a, b, c);
    CHECK(res.plan.marginal_violation(a, b) <= 1e-12);
    double primal = 0.0, dual = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
      dual += a[i] * res.u[i];
      for (std::size_t j = 0; j < cc; ++j) {
        primal += res.plan.at(i, j) * c.at(i, j);
        CHECK(res.plan.at(i, j) >= 0.0);
        CHECK(res.u[i] + res.v[j] <= c.at(i, j) + 1e-10);
        if (res.plan.at(i, j) > 1e-14) CHECK(res.u[i] + res.v[j] == doctest::Approx(c.at(i, j)).epsilon(1e-10));
      }
    }
    for (std::size_t j = 0; j < cc; ++j) dual += b[j] * res.v[j];
    CHECK(primal == doctest::Approx(res.value).epsilon(1e-12));
    CHECK(dual == doctest::Approx(primal).epsilon(1e-10));
  }
}

TEST_CASE("infinite costs never carry mass") {
  CostMatrix c(2, 2);
  c.entries = {1.0, 0.0, 0.0, 1.0};
  c.infinite = {0, 1, 1, 0};
  const std::vector<double> w{0.5, 0.5};
  const auto r = we_distance_exact(w, w, c);
  CHECK(r.finite);
  CHECK(r.value == doctest::Approx(1.0));
  c.infinite = {1, 1, 0, 0};
  CHECK_FALSE(we_distance_exact(w, w, c).finite);
}

TEST_CASE("entropic value lies between the exact value and the entropy bound") {
  std::mt19937_64 rng(13);
  for (double eps : {0.5, 0.05, 0.005}) {
    const CostMatrix c = random_cost(6, 8, rng);
    const auto a = simplex(6, rng), b = simplex(8, rng);
    const double exact = we_distance_exact(a, b, c).value;
    const auto e = we_distance_entropic(a, b, c, eps);
    CHECK(e.converged);
    CHECK(e.plan.marginal_violation(a, b) <= 1e-12);
    CHECK(e.value >= exact - 1e-12);
    CHECK(e.value <= exact + e.entropy_bound + 1e-6);
    CHECK(e.entropy_bound == doctest::Approx(eps * std::log(48.0)));
  }
}

TEST_CASE("relative-energy distance between ensembles") {
  const Grid g = build_grid(1, {1, 1}, {16, 1});
  const Ensemble a = wave_ensemble(g, 1, 4), b = wave_ensemble(g, 2, 3);
  const auto caa = build_cost_matrix(a, a, EosParams{});
  CHECK(std::abs(we_distance_exact(a, a, caa).value) <= 1e-14);
  const auto cab = build_cost_matrix(a, b, EosParams{}, 2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      double direct = 0.0;
      for (std::size_t k = 0; k < g.cell_count(); ++k) {
        direct += relative_energy_density(a.atoms[i].state.rho[k], a.atoms[i].state.mom[k],
                                          b.atoms[j].state.rho[k], b.atoms[j].state.mom[k], EosParams{})
                      .value;
      }
      CHECK(cab.at(i, j) == doctest::Approx(direct * g.cell_volume()).epsilon(1e-12));
    }
  }
  const auto [ab, ba] = asymmetry_report(a, b, EosParams{});
  CHECK(ab > 0.0);
  CHECK(ba > 0.0);
  CHECK(ab != doctest::Approx(ba));
}

TEST_CASE("boundary data mismatch is a precondition error") {
  const Grid g = build_grid(1, {1, 1}, {16, 1});
  const Ensemble a = wave_ensemble(g, 1, 2);
  Ensemble b = a;
  for (auto& atom : b.atoms) atom.bd.u_cell.assign(g.cell_count(), Vec2{0.1, 0.0});
  CHECK_THROWS_AS(build_cost_matrix(a, b, EosParams{}), PreconditionError);
}

TEST_CASE("continuity experiment") {
  const Grid g = build_grid(1, {1, 1}, {24, 1});
  const Ensemble nu = wave_ensemble(g, 3, 2);
  ContinuityConfig cc;
  cc.deltas = {0.0, 0.1, 0.05};
  cc.output_times = {0.0, 0.1, 0.2};
  cc.horizon = 0.2;
  const ContinuityReport rep = continuity_experiment(nu, cc, SolverConfig{});
  REQUIRE(rep.valid);
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.rows[0].initial_distance == 0.0);
  CHECK(rep.rows[0].sup_distance == 0.0);
  CHECK(rep.rows[0].ratio == 0.0);
  // t = 0 is among the outputs, so the sup dominates the initial distance.
  for (std::size_t k = 1; k < 3; ++k) CHECK(rep.rows[k].ratio >= 1.0);
  CHECK(rep.rows[2].sup_distance < rep.rows[1].sup_distance);
  CHECK(continuity_csv(rep).rfind("n,delta,w_initial,sup_e,ratio,w1_density,rho_min,rho_max", 0) == 0);

  cc.band = 1.05;
  const ContinuityReport bad = continuity_experiment(nu, cc, SolverConfig{});
  CHECK_FALSE(bad.valid);
  CHECK(bad.rows.empty());
  CHECK(bad.diagnostic.find("base density") != std::string::npos);
  cc.output_times = {0.5};
  CHECK_THROWS_AS(continuity_experiment(nu, cc, SolverConfig{}), PreconditionError);
}
