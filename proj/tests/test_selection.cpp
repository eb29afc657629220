#include <doctest.h>

#include <cmath>

#include "statns/error.hpp"
#include "statns/selection.hpp"

using namespace statns;

namespace {

SelectionFunctional identity_beta(double lambda) {
  SelectionFunctional f;
  f.lambda = lambda;
  f.beta = [](double e) { return e; };
  f.beta_sup = 10.0;
  return f;
}

// int_0^H exp(-l t) (a + b t) dt
double linear_exp_integral(double a, double b, double l, double H) {
  const double e = std::exp(-l * H);
  return a * (1 - e) / l + b * (1 - e * (1 + l * H)) / (l * l);
}

Trajectory run(double dissipation, double dt) {
  const Grid g = build_grid(1, {1, 1}, {24, 1});
  FieldState s(g.cell_count());
  for (std::size_t c = 0; c < s.size(); ++c) {
    const double x = g.cell_center(c)[0];
    s.rho[c] = 1.0 + 0.2 * std::cos(M_PI * x);
    s.mom[c] = {0.2 * std::sin(M_PI * x), 0.0};
  }
  SolverConfig cfg;
  cfg.artificial_dissipation = dissipation;
  cfg.dt = dt;
  const double times[] = {0.0, 0.1, 0.2, 0.3};
  return integrate(g, s, wall_boundary(g), cfg, times);
}

}  // namespace

TEST_CASE("krylov value of piecewise-linear traces in closed form") {
  const EnergyTrace flat(2.0, {0.0}, {2.0}, {2.0});
  SelectionFunctional f;
  f.lambda = 0.5;
  const auto v = krylov_value(flat, f, 4.0);
  CHECK(v.value == doctest::Approx(std::atan(2.0) * (1 - std::exp(-2.0)) / 0.5).epsilon(1e-13));
  CHECK(v.tail_bound == doctest::Approx(std::exp(-2.0) * M_PI / 2 / 0.5));

  // Linear decay 3 -> 1 on [0, 1], then constant.
  const EnergyTrace lin(3.0, {0.0, 1.0}, {3.0, 1.0}, {3.0, 1.0});
  for (double l : {0.3, 1.0, 7.0}) {
    const auto k = krylov_value(lin, identity_beta(l), 2.5);
    const double expect = linear_exp_integral(3.0, -2.0, l, 1.0) +
                          std::exp(-l) * linear_exp_integral(1.0, 0.0, l, 1.5);
    CHECK(k.value == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(krylov_value(flat, f).value == doctest::Approx(krylov_value(flat, f, 10.0).value));
}

TEST_CASE("lambda V tends to beta of the initial right limit") {
  const EnergyTrace jump(3.0, {0.0, 1.0}, {3.0, 2.0}, {2.5, 2.0});
  double prev = 1e9;
  for (double l : {10.0, 100.0, 1000.0, 10000.0}) {
    SelectionFunctional f;
    f.lambda = l;
    const double err = std::abs(l * krylov_value(jump, f, 2.0).value - std::atan(2.5));
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 1e-4);
}

TEST_CASE("invalid functionals are rejected") {
  SelectionFunctional f;
  f.lambda = 0.0;
  CHECK_THROWS_AS(f.validate(), PreconditionError);
}

TEST_CASE("energy order on breakpoints") {
  const EnergyTrace hi(3.0, {0.0, 1.0, 2.0}, {3.0, 2.0, 1.0}, {3.0, 2.0, 1.0});
  const EnergyTrace lo(3.0, {0.0, 1.0, 2.0}, {3.0, 1.5, 0.5}, {3.0, 1.5, 0.5});
  CHECK(energy_order(lo, hi, 1e-12) == EnergyOrder::less_or_equal);
  CHECK(energy_order(hi, lo, 1e-12) == EnergyOrder::greater);
  CHECK(energy_order(hi, hi, 0.0) == EnergyOrder::less_or_equal);
  CHECK(strictly_dominates(lo, hi, 1e-12));
  CHECK_FALSE(strictly_dominates(hi, hi, 1e-12));
  // Crossing between breakpoints of the other trace.
  const EnergyTrace cross(3.0, {0.0, 0.5, 2.0}, {3.0, 2.9, 0.5}, {3.0, 2.9, 0.5});
  CHECK(energy_order(cross, hi, 1e-12) == EnergyOrder::incomparable);
  CHECK(energy_order(hi, cross, 1e-12) == EnergyOrder::incomparable);
  // A downward jump only visible through the right limit.
  const EnergyTrace dip(3.0, {0.0, 1.0, 2.0}, {3.0, 2.0, 1.0}, {3.0, 1.0, 1.0});
  CHECK(energy_order(dip, hi, 1e-12) == EnergyOrder::less_or_equal);
  CHECK(strictly_dominates(dip, hi, 1e-12));
  CHECK(std::string(to_string(EnergyOrder::incomparable)) == "incomparable");
}

TEST_CASE("selection prefers the dissipative candidate and is deterministic") {
  const double dt = 2e-3;
  CandidateFamily fam;
  fam.bd = wall_boundary(build_grid(1, {1, 1}, {24, 1}));
  fam.candidates.push_back({"dissipation=1", "test", run(1.0, dt)});
  fam.candidates.push_back({"dissipation=4", "test", run(4.0, dt)});
  CHECK_NOTHROW(fam.validate());
  CHECK(energy_order(fam.candidates[1].trajectory, fam.candidates[0].trajectory) == EnergyOrder::less_or_equal);
  SelectionFunctional f;
  const auto rep = select_maximal(fam, f);
  CHECK(rep.ids[rep.selected] == "dissipation=4");
  CHECK(rep.audit_passed);
  CHECK(rep.values[1] < rep.values[0]);
  CHECK(rep.order[0][0] == EnergyOrder::less_or_equal);
  CHECK(rep.order[0][1] == EnergyOrder::greater);
  const auto again = select_maximal(fam, f);
  CHECK(selection_json(again) == selection_json(rep));

  CandidateFamily single;
  single.bd = fam.bd;
  single.candidates = {fam.candidates[0]};
  const auto one = select_maximal(single, f);
  CHECK(one.selected == 0);
  CHECK(one.audit_passed);

  // Identical candidates tie; the smaller id wins.
  CandidateFamily tie;
  tie.bd = fam.bd;
  tie.candidates = {fam.candidates[0], fam.candidates[0]};
  tie.candidates[0].id = "b";
  tie.candidates[1].id = "a";
  CHECK(tie.candidates[select_maximal(tie, f).selected].id == "a");
}

TEST_CASE("family validation") {
  CandidateFamily fam;
  fam.bd = wall_boundary(build_grid(1, {1, 1}, {24, 1}));
  CHECK_THROWS_AS(fam.validate(), PreconditionError);
  fam.candidates.push_back({"x", "", run(1.0, 2e-3)});
  fam.candidates.push_back({"x", "", run(2.0, 2e-3)});
  CHECK_THROWS_AS(fam.validate(), PreconditionError);
  fam.candidates[1].id = "y";
  fam.candidates[1].trajectory.states[0].rho[0] += 1e-3;
  CHECK_THROWS_AS(fam.validate(), PreconditionError);
}

TEST_CASE("lyapunov limit on sampled data") {
  std::vector<double> t, e, zero;
  for (int k = 0; k <= 40; ++k) {
    t.push_back(0.25 * k);
    e.push_back(2.0 + std::exp(-3.0 * t.back()));
    zero.push_back(0.0);
  }
  const auto ok = lyapunov_limit_check(t, e, e, zero);
  CHECK(ok.converged);
  CHECK(ok.monotone);
  CHECK(ok.e_infinity == doctest::Approx(2.0).epsilon(1e-9));

  auto gap = e;
  gap.back() += 0.1;
  const auto bad = lyapunov_limit_check(t, e, gap, zero);
  CHECK_FALSE(bad.converged);
  CHECK(bad.state_gap == doctest::Approx(0.1).epsilon(1e-6));

  std::vector<double> slow;
  for (double x : t) slow.push_back(2.0 + std::exp(-0.2 * x));
  CHECK_FALSE(lyapunov_limit_check(t, slow, slow, zero).converged);

  // The potential enters with a minus sign.
  std::vector<double> pot(t.size(), 0.5);
  CHECK(lyapunov_limit_check(t, e, e, pot).e_infinity == doctest::Approx(1.5).epsilon(1e-9));
}

TEST_CASE("lyapunov check on trajectories") {
  const Grid g = build_grid(1, {1, 1}, {16, 1});
  FieldState s(g.cell_count());
  std::fill(s.rho.begin(), s.rho.end(), 1.0);
  SolverConfig cfg;
  const double times[] = {0.0, 0.5, 1.0, 1.5, 2.0};
  const auto eq = lyapunov_limit_check(integrate(g, s, wall_boundary(g), cfg, times), wall_boundary(g), cfg.eos);
  CHECK(eq.converged);
  CHECK(eq.e_infinity == doctest::Approx(pressure_potential(1.0, cfg.eos)));

  const auto channel = boundary_from_functions(
      g, [](Vec2) { return 1.0; }, [](Vec2) { return Vec2{1.0, 0.0}; }, [](Vec2) { return Vec2{0.0, 0.0}; },
      nullptr, 0.5);
  for (auto& m : s.mom) m = {1.0, 0.0};
  const Trajectory tr = integrate(g, s, channel, cfg, times);
  CHECK_THROWS_AS(lyapunov_limit_check(tr, channel, cfg.eos), PreconditionError);
}
