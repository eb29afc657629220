#include "statns/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "statns/archive.hpp"
#include "statns/commands.hpp"
#include "statns/config.hpp"
#include "statns/eos.hpp"
#include "statns/error.hpp"
#include "statns/measures.hpp"
#include "statns/mms.hpp"
#include "statns/selection.hpp"
#include "statns/transport.hpp"

namespace statns {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Collects failed conditions; the criterion passes when none were recorded.
struct Checks {
  std::vector<std::string> failures;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void note(const std::string& s) { notes.push_back(s); }
};

template <class F>
CriterionResult run_criterion(int id, const char* title, double budget, F&& body) {
  CriterionResult r;
  r.id = id;
  r.title = title;
  r.budget = budget;
  const auto t0 = std::chrono::steady_clock::now();
  Checks c;
  try {
    body(c);
  } catch (const std::exception& e) {
    c.failures.push_back(std::string("exception: ") + e.what());
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.passed = c.failures.empty();
  if (budget > 0.0 && r.seconds > budget) {
    r.passed = false;
    c.failures.push_back("runtime " + num(r.seconds) + " s over budget " + num(budget) + " s");
  }
  std::string d;
  for (const auto& f : c.failures) d += (d.empty() ? "" : "; ") + f;
  for (const auto& n : c.notes) d += (d.empty() ? "" : "; ") + n;
  r.detail = d;
  return r;
}

double energy(double rho, Vec2 m, const EosParams& eos) { return energy_density(rho, m, eos).value; }

// Fourth-order central difference.
template <class F>
double derivative(F&& f, double x, double h) {
  return (8.0 * (f(x + h) - f(x - h)) - (f(x + 2 * h) - f(x - 2 * h))) / (12.0 * h);
}

FieldState smooth_state(const Grid& g, std::uint64_t seed, double amp) {
  FourierSampler s;
  s.seed = seed;
  s.rho_amplitude = amp;
  s.mom_amplitude = amp;
  const auto bd = wall_boundary(g);
  return sample_fourier(g, bd, s, 1, EosParams{}).atoms.front().state;
}

double sup_mms_error(const Trajectory& tr, const MmsProblem& p) {
  double e = 0.0;
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    e = std::max(e, p.l1_error(tr.states[k], tr.grid, tr.times[k]));
  }
  return e;
}

double max_step_residual(const Trajectory& tr) {
  double worst = -INFINITY;
  for (const auto& s : tr.steps) worst = std::max(worst, s.energy_residual);
  return worst;
}

}  // namespace

CriterionResult verify_bregman(const VerifyOptions&) {
  return run_criterion(1, "Bregman suite", 5.0, [](Checks& c) {
    const EosParams eos{};
    std::mt19937_64 rng(20240601);
    auto U = [&](double lo, double hi) { return lo + (hi - lo) * uniform01(rng()); };
    double worst_neg = 0.0, worst_base = 0.0, worst_rel = 0.0;
    for (int k = 0; k < 1000; ++k) {
      const double rho = std::exp(U(std::log(0.1), std::log(10.0)));
      const double rho_t = std::exp(U(std::log(0.1), std::log(10.0)));
      const Vec2 m{U(-3, 3), U(-3, 3)}, mt{U(-3, 3), U(-3, 3)};
      const double rel = relative_energy_density(rho, m, rho_t, mt, eos).value;
      worst_neg = std::min(worst_neg, rel);
      worst_base = std::max(worst_base, std::abs(relative_energy_density(rho_t, mt, rho_t, mt, eos).value));
      // Bregman identity with a numerical gradient of E at the base point.
      const double h_r = 1e-3 * rho_t, h_m = 1e-3 * std::max(1.0, std::hypot(mt[0], mt[1]));
      const double dr = derivative([&](double r) { return energy(r, mt, eos); }, rho_t, h_r);
      const double dm0 =
          derivative([&](double v) { return energy(rho_t, {v, mt[1]}, eos); }, mt[0], h_m);
      const double dm1 =
          derivative([&](double v) { return energy(rho_t, {mt[0], v}, eos); }, mt[1], h_m);
      const double lin = dr * (rho - rho_t) + dm0 * (m[0] - mt[0]) + dm1 * (m[1] - mt[1]);
      const double bregman = energy(rho, m, eos) - energy(rho_t, mt, eos) - lin;
      const double scale = energy(rho, m, eos) + energy(rho_t, mt, eos) + std::abs(lin);
      worst_rel = std::max(worst_rel, std::abs(bregman - rel) / scale);
    }
    c.require(worst_neg >= 0.0, "negative relative energy " + num(worst_neg));
    c.require(worst_base == 0.0, "E(x|x) = " + num(worst_base));
    c.require(worst_rel <= 1e-6, "Bregman identity error " + num(worst_rel));
    c.note("1000 pairs, max identity error " + num(worst_rel));
    // Asymmetry witness.
    const double ab = relative_energy_density(0.5, {0, 0}, 2.0, {0, 0}, eos).value;
    const double ba = relative_energy_density(2.0, {0, 0}, 0.5, {0, 0}, eos).value;
    c.require(std::abs(ab - ba) > 1e-3 * std::max(ab, ba), "no asymmetry witness");
    c.note("E(0.5|2) = " + num(ab) + ", E(2|0.5) = " + num(ba));
  });
}

CriterionResult verify_eos(const VerifyOptions&) {
  return run_criterion(2, "EOS and pressure potential", 1.0, [](Checks& c) {
    double worst = 0.0, worst_fd = 0.0, worst_convex = 0.0;
    for (double gamma : {1.2, 1.4, 5.0 / 3.0, 2.0}) {
      const EosParams eos{1.0, gamma};
      const int n = 2000;
      const double h = (10.0 - 0.1) / n;
      for (int k = 0; k <= n; ++k) {
        const double r = 0.1 + k * h;
        const double p = pressure(r, eos);
        const double lhs = pressure_potential_derivative(r, eos) * r - pressure_potential(r, eos);
        worst = std::max(worst, std::abs(lhs - p) / p);
        const double dP = derivative([&](double x) { return pressure_potential(x, eos); }, r, 1e-3 * r);
        worst_fd = std::max(worst_fd, std::abs(dP * r - pressure_potential(r, eos) - p) / p);
        if (k > 0 && k < n) {
          const double d2 = (pressure_potential(r + h, eos) - 2 * pressure_potential(r, eos) +
                             pressure_potential(r - h, eos)) / (h * h);
          worst_convex = std::min(worst_convex, d2);
        }
      }
    }
    c.require(worst <= 1e-8, "P'rho - P - p relative error " + num(worst));
    c.require(worst_fd <= 1e-8, "finite-difference P' error " + num(worst_fd));
    c.require(worst_convex >= -1e-12, "second divided difference " + num(worst_convex));
    c.note("identity error " + num(worst) + ", FD " + num(worst_fd));
  });
}

CriterionResult verify_conservation(const VerifyOptions&) {
  return run_criterion(3, "Solver conservation", 10.0, [](Checks& c) {
    SolverConfig cfg;
    // Closed box, 1D and 2D.
    double worst_closed = 0.0;
    for (int dim : {1, 2}) {
      const Grid g = dim == 1 ? build_grid(1, {1, 1}, {64, 1}) : build_grid(2, {1, 1}, {16, 16});
      const auto bd = wall_boundary(g);
      const FieldState s = smooth_state(g, 5, 0.2);
      std::vector<double> out;
      for (int k = 0; k <= 10; ++k) out.push_back(0.05 * k);
      const Trajectory tr = integrate(g, s, bd, cfg, out);
      const double m0 = total_mass(s, g);
      for (const auto& st : tr.states) worst_closed = std::max(worst_closed, std::abs(total_mass(st, g) - m0) / m0);
    }
    c.require(worst_closed <= 1e-13, "closed-domain mass drift " + num(worst_closed));
    // Open channel.
    const ExperimentConfig inflow = preset_config("inflow");
    const Grid g = make_grid(inflow);
    const auto bd = make_boundary(inflow, g);
    const Trajectory tr = integrate(g, make_initial(inflow, g, bd), bd, inflow.solver,
                                    inflow.output_times);
    double worst_open = 0.0;
    for (double r : mass_balance_residual(tr, bd)) worst_open = std::max(worst_open, std::abs(r));
    // Independent telescoping: mass change equals the summed boundary flux.
    double flux = 0.0;
    for (const auto& s : tr.steps) flux += s.dt * s.terms.mass_outflux;
    const double tele = std::abs(total_mass(tr.states.back(), g) - total_mass(tr.states.front(), g) + flux);
    c.require(worst_open <= 1e-8 && tele <= 1e-8,
              "open-domain balance " + num(worst_open) + " / " + num(tele));
    // Equilibrium for 1000 steps.
    bool exact = true;
    for (int dim : {1, 2}) {
      const Grid ge = dim == 1 ? build_grid(1, {1, 1}, {32, 1}) : build_grid(2, {1, 1}, {12, 12});
      const auto be = wall_boundary(ge);
      FieldState s(ge.cell_count());
      std::fill(s.rho.begin(), s.rho.end(), 1.3);
      SolverConfig ce;
      ce.dt = 1e-3;
      const double t_end = 1000 * ce.dt;
      const double times[] = {0.0, t_end};
      const Trajectory te = integrate(ge, s, be, ce, times);
      exact = exact && te.steps.size() == 1000 && te.states.back() == s;
      for (const auto& st : te.steps) exact = exact && st.begin == s;
    }
    c.require(exact, "equilibrium not preserved bit-exactly");
    c.note("closed drift " + num(worst_closed) + ", open balance " + num(worst_open));
  });
}

CriterionResult verify_mms(const VerifyOptions&) {
  return run_criterion(4, "MMS convergence", 60.0, [](Checks& c) {
    const ExperimentConfig cfg = preset_config("mms");
    MmsProblem p;
    std::vector<double> errs;
    for (int n : {32, 64, 128}) {
      const Grid g = p.grid(n);
      IntegrateOptions io;
      io.forcing = p.forcing();
      const Trajectory tr = integrate(g, p.exact(g, 0.0), p.boundary(g), cfg.solver, cfg.output_times, io);
      errs.push_back(sup_mms_error(tr, p));
    }
    std::string ratios;
    for (std::size_t k = 1; k < errs.size(); ++k) {
      const double r = errs[k - 1] / errs[k];
      c.require(r >= 1.7, "ratio " + num(r) + " below 1.7");
      ratios += (ratios.empty() ? "" : ", ") + num(r);
    }
    c.note("errors " + num(errs[0]) + " " + num(errs[1]) + " " + num(errs[2]) + ", ratios " + ratios);
  });
}

CriterionResult verify_energy_inequality(const VerifyOptions&) {
  return run_criterion(5, "Energy inequality", 60.0, [](Checks& c) {
    SolverConfig cfg;
    cfg.cfl = 0.4;
    double worst_r = -INFINITY, worst_inc = -INFINITY;
    for (int k = 0; k < 20; ++k) {
      const bool two_d = k % 2 == 1;
      const Grid g = two_d ? build_grid(2, {1, 1}, {16, 16}) : build_grid(1, {1, 1}, {64, 1});
      const auto bd = wall_boundary(g);
      const FieldState s = smooth_state(g, 100 + k, 0.3);
      const double times[] = {0.0, 0.25, 0.5};
      const Trajectory tr = integrate(g, s, bd, cfg, times);
      const double tol = kEnergyTolerance * std::max(1.0, tr.energy_trace.initial_value());
      worst_r = std::max(worst_r, max_step_residual(tr) / tol);
      const auto& tt = tr.energy_trace;
      for (std::size_t j = 0; j < tt.times().size(); ++j) {
        worst_inc = std::max(worst_inc, (tt.right()[j] - tt.left()[j]) / tol);
        if (j + 1 < tt.times().size()) worst_inc = std::max(worst_inc, (tt.left()[j + 1] - tt.right()[j]) / tol);
      }
    }
    c.require(worst_r <= 1.0, "step residual " + num(worst_r) + " tol_E");
    c.require(worst_inc <= 1.0, "trace increase " + num(worst_inc) + " tol_E");
    c.note("max R_k / tol_E = " + num(worst_r));
  });
}

CriterionResult verify_statistical_inequality(const VerifyOptions& o) {
  return run_criterion(6, "Statistical energy inequality", 120.0, [&](Checks& c) {
    const Grid g = build_grid(1, {1, 1}, {64, 1});
    const auto bd = wall_boundary(g);
    SolverConfig cfg;
    cfg.lambda = 0.02;
    FourierSampler fs;
    fs.seed = 7;
    const Ensemble ens = sample_fourier(g, bd, fs, 8, cfg.eos);
    const auto basis = build_spectral_basis(g, 4);
    const double T = 0.5;
    std::vector<double> times;
    for (int k = 0; k <= 10; ++k) times.push_back(T * k / 10);
    PropagateOptions po;
    po.workers = o.workers;
    const auto trajs = propagate(ens, times, cfg, po);
    const auto psi = hat_function(0.0, T);

    // Dirac ensemble equals the single-trajectory residual exactly.
    const Ensemble d = dirac(g, ens.atoms[3]);
    const std::vector<Trajectory> one{trajs[3]};
    const auto rd = statistical_energy_inequality_residual(d, one, energy_observable(), psi, cfg, basis);
    const auto rt = trajectory_energy_residual(trajs[3], bd, cfg, basis, energy_observable(), psi);
    c.require(rd.residual == rt.residual, "Dirac residual differs from the trajectory residual");

    // Phi(r) reduces to the integrated continuity equation.
    const auto rm = statistical_energy_inequality_residual(
        ens, trajs, mass_observable({1.0, 0.5, -0.3, 0.2}, {0.3, 0.1, 0.0, 0.05}), psi, cfg, basis);
    c.require(std::abs(rm.residual) <= rm.tolerance,
              "mass identity residual " + num(rm.residual) + " > " + num(rm.tolerance));

    // Phi = e on the 8-atom ensemble.
    const auto re = statistical_energy_inequality_residual(ens, trajs, energy_observable(), psi, cfg, basis);
    c.require(re.residual <= re.tolerance, "Phi=e residual " + num(re.residual) + " > " + num(re.tolerance));
    c.note("Phi=e residual " + num(re.residual) + ", mass identity " + num(rm.residual) + " (tol " +
           num(rm.tolerance) + ")");
  });
}

CriterionResult verify_markov(const VerifyOptions& o) {
  return run_criterion(7, "Markov structure", 60.0, [&](Checks& c) {
    const Grid g = build_grid(1, {1, 1}, {64, 1});
    const auto bd = wall_boundary(g);
    SolverConfig cfg;
    cfg.lambda = 0.02;
    FourierSampler fs;
    fs.seed = 21;
    const Ensemble ens = sample_fourier(g, bd, fs, 4, cfg.eos);
    PropagateOptions po;
    po.workers = o.workers;

    // M_0 = identity.
    const Ensemble m0 = pushforward(ens, 0.0, cfg, po);
    bool id = m0.weights == ens.weights;
    for (std::size_t k = 0; k < ens.size(); ++k) {
      id = id && m0.atoms[k].state == ens.atoms[k].state && m0.atoms[k].energy == ens.atoms[k].energy;
    }
    c.require(id, "M_0 is not the identity");

    // Dirac consistency on the output grid.
    std::vector<double> times;
    for (int k = 0; k <= 8; ++k) times.push_back(0.05 * k);
    const auto trajs = propagate(ens, times, cfg, po);
    bool dirac_ok = true;
    for (std::size_t k = 0; k < ens.size(); ++k) {
      const Trajectory single = integrate(g, ens.atoms[k].state, bd, cfg, times,
                                          IntegrateOptions{ens.atoms[k].energy, nullptr, 8});
      dirac_ok = dirac_ok && single.states == trajs[k].states;
      PropagateOptions pd = po;
      pd.atom_dt = {single.dt};
      for (std::size_t j = 0; j < times.size(); ++j) {
        const Ensemble pk = pushforward(dirac(g, ens.atoms[k]), times[j], cfg, pd);
        dirac_ok = dirac_ok && pk.atoms[0].state == single.states[j] &&
                   pk.atoms[0].energy == output_energy(single, j, bd, cfg.eos);
      }
    }
    c.require(dirac_ok, "Dirac pushforward differs from the single trajectory");

    // Affinity on mixtures.
    FourierSampler fs2;
    fs2.seed = 22;
    const Ensemble other = sample_fourier(g, bd, fs2, 3, cfg.eos);
    const double alpha = 0.3;
    const Ensemble mix = mixture({ens, other}, {alpha, 1.0 - alpha});
    const Ensemble pm = pushforward(mix, 0.2, cfg, po);
    const Ensemble p1 = pushforward(ens, 0.2, cfg, po);
    const Ensemble p2 = pushforward(other, 0.2, cfg, po);
    bool affine = pm.size() == p1.size() + p2.size();
    for (std::size_t k = 0; affine && k < pm.size(); ++k) {
      const bool first = k < p1.size();
      const DataPoint& q = first ? p1.atoms[k] : p2.atoms[k - p1.size()];
      const double w = first ? alpha * ens.weights[k] : (1.0 - alpha) * other.weights[k - p1.size()];
      affine = pm.atoms[k].state == q.state && pm.atoms[k].energy == q.energy && pm.weights[k] == w;
    }
    c.require(affine, "mixture pushforward is not the mixture of pushforwards");

    // Semigroup: zero on the step grid, first order off it.
    std::vector<double> dt = resolve_atom_dt(ens, cfg, {});
    const double h = *std::min_element(dt.begin(), dt.end());
    PropagateOptions pg = po;
    pg.atom_dt.assign(ens.size(), h);
    const double on = semigroup_residual(ens, 37 * h, 23 * h, cfg, pg);
    c.require(on == 0.0, "on-grid semigroup residual " + num(on));
    std::vector<double> off;
    for (int level = 0; level < 3; ++level) {
      pg.atom_dt.assign(ens.size(), h / (1 << level) * 0.97);
      off.push_back(semigroup_residual(ens, 0.1, 0.05, cfg, pg));
    }
    const double o1 = std::log2(off[0] / off[1]), o2 = std::log2(off[1] / off[2]);
    c.require(off[0] > 0.0 && o1 >= 0.8 && o2 >= 0.8,
              "semigroup decay orders " + num(o1) + ", " + num(o2));
    c.note("off-grid residuals " + num(off[0]) + " " + num(off[1]) + " " + num(off[2]) +
           ", orders " + num(o1) + " " + num(o2));
  });
}

CriterionResult verify_transport(const VerifyOptions&) {
  return run_criterion(8, "Optimal transport", 30.0, [](Checks& c) {
    std::mt19937_64 rng(77);
    double worst = 0.0, worst_viol = 0.0, worst_ent = 0.0, worst_ent_viol = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 1 + trial % 6;
      std::vector<double> cost(n * n);
      for (auto& x : cost) x = 10.0 * uniform01(rng());
      const auto cm = CostMatrix::from_dense(n, n, cost);
      const std::vector<double> w(n, 1.0 / n);
      const TransportResult r = we_distance_exact(w, w, cm);
      // Exhaustive minimum over permutations (Birkhoff vertices).
      std::vector<int> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      double best = INFINITY;
      do {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += cost[i * n + perm[i]];
        best = std::min(best, s / n);
      } while (std::next_permutation(perm.begin(), perm.end()));
      worst = std::max(worst, std::abs(best - r.value) / std::max(1.0, best));
      worst_viol = std::max(worst_viol, r.plan.marginal_violation(w, w));
      if (n == 5) {
        const EntropicResult e = we_distance_entropic(w, w, cm, 0.01);
        worst_ent = std::max(worst_ent, std::abs(e.value - r.value) / r.value);
        worst_ent_viol = std::max(worst_ent_viol, e.plan.marginal_violation(w, w));
      }
    }
    c.require(worst <= 1e-12, "exact vs permutations " + num(worst));
    c.require(worst_ent <= 0.01, "entropic relative gap " + num(worst_ent));
    c.require(worst_viol <= 1e-9 && worst_ent_viol <= 1e-9,
              "marginal violation " + num(std::max(worst_viol, worst_ent_viol)));
    c.note("exact gap " + num(worst) + ", entropic gap " + num(worst_ent));
  });
}

CriterionResult verify_continuity(const VerifyOptions& o) {
  return run_criterion(9, "Continuity at regular data", 300.0, [&](Checks& c) {
    const Grid g = build_grid(1, {1, 1}, {64, 1});
    const auto bd = wall_boundary(g);
    SolverConfig cfg;
    cfg.lambda = 0.02;
    FourierSampler fs;
    fs.seed = 11;
    const Ensemble nu = sample_fourier(g, bd, fs, 2, cfg.eos);
    ContinuityConfig cc;
    for (int n = 1; n <= 6; ++n) cc.deltas.push_back(std::ldexp(1.0, -n));
    cc.horizon = 0.5;
    for (int k = 0; k <= 10; ++k) cc.output_times.push_back(0.05 * k);
    cc.workers = o.workers;
    const ContinuityReport rep = continuity_experiment(nu, cc, cfg);
    c.require(rep.valid, "invalid experiment: " + rep.diagnostic);
    c.require(rep.monotone, "sup distance not monotone in n");
    c.require(std::abs(rep.log_ratio_slope) <= 0.1, "log-ratio slope " + num(rep.log_ratio_slope));
    c.require(std::isfinite(rep.max_ratio) && rep.max_ratio > 0.0, "ratio bound " + num(rep.max_ratio));
    std::string col;
    for (const auto& r : rep.rows) col += (col.empty() ? "" : " ") + num(r.sup_distance);
    c.note("e_n: " + col + ", max ratio " + num(rep.max_ratio) + ", slope " + num(rep.log_ratio_slope));
  });
}

namespace {

EnergyTrace random_trace(std::mt19937_64& rng, double horizon, int pieces, double start) {
  std::vector<double> t{0.0}, left{start}, right{start};
  double e = start;
  for (int k = 1; k <= pieces; ++k) {
    t.push_back(horizon * (k - 0.5 * uniform01(rng())) / pieces);
    e -= 0.3 * uniform01(rng()) / pieces;
    left.push_back(e);
    if (uniform01(rng()) < 0.2) e -= 0.05 * uniform01(rng());
    right.push_back(e);
  }
  return EnergyTrace(start, t, left, right);
}

// b minus a smooth bump on [lo, hi], sampled on its own breakpoints.
EnergyTrace lowered(const EnergyTrace& b, double lo, double hi, double depth, int samples) {
  std::vector<double> t;
  for (double x : b.times()) t.push_back(x);
  for (int k = 0; k <= samples; ++k) t.push_back(lo + (hi - lo) * k / samples);
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  auto bump = [&](double x) {
    return x <= lo || x >= hi ? 0.0 : depth * std::sin(M_PI * (x - lo) / (hi - lo));
  };
  std::vector<double> left, right;
  for (double x : t) {
    left.push_back(b.value(x) - bump(x));
    right.push_back(b.right_limit(x) - bump(x));
  }
  return EnergyTrace(b.initial_value(), t, left, right, 1e-12);
}

// Dense independent comparison: a <= b + tol everywhere and a < b - tol somewhere.
bool dominates_dense(const EnergyTrace& a, const EnergyTrace& b, double tol, double horizon) {
  bool strict = false;
  std::vector<double> pts;
  for (int k = 1; k <= 4000; ++k) pts.push_back(horizon * k / 4000.0);
  for (double x : a.times()) pts.push_back(x);
  for (double x : b.times()) pts.push_back(x);
  for (double x : pts) {
    if (x <= 0.0) continue;
    for (double d : {a.value(x) - b.value(x), a.right_limit(x) - b.right_limit(x)}) {
      if (d > tol) return false;
      if (d < -tol) strict = true;
    }
  }
  return strict;
}

}  // namespace

CriterionResult verify_selection(const VerifyOptions&) {
  return run_criterion(10, "Selection", 30.0, [](Checks& c) {
    std::mt19937_64 rng(1010);
    const double tol = 1e-9;
    // Closed form for a constant trace.
    {
      SelectionFunctional f;
      f.lambda = 0.7;
      const EnergyTrace flat(1.5, {0.0, 1.0, 2.0}, {1.5, 1.5, 1.5}, {1.5, 1.5, 1.5});
      const double H = 6.0;
      const double exact = std::atan(1.5) * (1.0 - std::exp(-0.7 * H)) / 0.7;
      const KrylovValue kv = krylov_value(flat, f, H);
      c.require(std::abs(kv.value - exact) <= 1e-13, "constant-trace closed form " + num(kv.value - exact));
    }
    // Order compatibility on 100 pairs.
    int compatible = 0;
    for (int k = 0; k < 100; ++k) {
      const EnergyTrace b = random_trace(rng, 2.0, 5 + k % 7, 1.0 + uniform01(rng()));
      const double lo = 1.8 * uniform01(rng());
      const double hi = lo + 0.05 + 0.15 * uniform01(rng());
      const EnergyTrace a = lowered(b, lo, std::min(hi, 2.0), 0.01 + 0.1 * uniform01(rng()), 8);
      SelectionFunctional f;
      f.lambda = 0.5 + 1.5 * uniform01(rng());
      if (k % 2) {
        f.beta = [](double e) { return std::tanh(e); };
        f.beta_sup = 1.0;
      }
      const bool strict = strictly_dominates(a, b, tol) && energy_order(a, b, tol) == EnergyOrder::less_or_equal &&
                          energy_order(b, a, tol) == EnergyOrder::greater;
      if (strict && krylov_value(a, f).value < krylov_value(b, f).value) ++compatible;
    }
    c.require(compatible == 100, "order compatibility " + std::to_string(compatible) + "/100");

    // Exhaustive audits on synthetic families of size 1..16.
    int audits = 0, audit_fail = 0;
    for (int size = 1; size <= 16; ++size) {
      for (int rep = 0; rep < 2; ++rep) {
        std::vector<EnergyTrace> traces;
        const EnergyTrace base = random_trace(rng, 2.0, 6, 2.0);
        for (int m = 0; m < size; ++m) {
          if (uniform01(rng()) < 0.5) {
            traces.push_back(lowered(base, 2.0 * uniform01(rng()) * 0.8, 2.0, 0.05 * uniform01(rng()), 6));
          } else {
            traces.push_back(random_trace(rng, 2.0, 6, 2.0));
          }
        }
        // Candidates carry only traces; select by the same functional as select_maximal.
        CandidateFamily fam;
        for (int m = 0; m < size; ++m) {
          Trajectory tr;
          tr.grid = build_grid(1, {1, 1}, {4, 1});
          tr.times = {0.0, 2.0};
          tr.states.assign(1, FieldState(4));
          tr.energy_trace = traces[m];
          char id[16];
          std::snprintf(id, sizeof id, "c%02d", m);
          fam.candidates.push_back({id, "synthetic", std::move(tr)});
        }
        SelectionFunctional f;
        const SelectionReport r = select_maximal(fam, f);
        ++audits;
        bool dominated = false;
        for (int m = 0; m < size; ++m) {
          if (m != static_cast<int>(r.selected) && dominates_dense(traces[m], traces[r.selected], tol, 2.0)) {
            dominated = true;
          }
        }
        if (dominated || !r.audit_passed) ++audit_fail;
      }
    }
    c.require(audit_fail == 0, std::to_string(audit_fail) + " of " + std::to_string(audits) + " audits failed");

    // Solver family over three dissipation levels.
    ExperimentConfig dec = preset_config("decaying");
    dec.output_times = {0.0, 0.5, 1.0, 1.5, 2.0};
    const Grid g = make_grid(dec);
    const auto bd = make_boundary(dec, g);
    const FieldState s0 = make_initial(dec, g, bd);
    SolverConfig strongest = dec.solver;
    strongest.artificial_dissipation = 4.0;
    const double dt = resolve_dt(g, s0, bd, strongest, dec.output_times);
    CandidateFamily fam;
    fam.bd = bd;
    for (double level : {1.0, 2.0, 4.0}) {
      SolverConfig sc = dec.solver;
      sc.artificial_dissipation = level;
      sc.dt = dt;
      fam.candidates.push_back({"ad" + std::to_string(static_cast<int>(level)), "artificial_dissipation",
                                integrate(g, s0, bd, sc, dec.output_times)});
    }
    const SelectionReport sr = select_maximal(fam, SelectionFunctional{});
    const double tr0_energy = fam.candidates[0].trajectory.energy_trace.initial_value();
    bool sdom = false;
    for (std::size_t m = 0; m < 3; ++m) {
      if (m != sr.selected && dominates_dense(fam.candidates[m].trajectory.energy_trace,
                                              fam.candidates[sr.selected].trajectory.energy_trace,
                                              kEnergyTolerance * std::max(1.0, tr0_energy), 2.0)) {
        sdom = true;
      }
    }
    c.require(sr.audit_passed && !sdom, "dissipation family audit failed");

    // Lyapunov limit: decaying preset passes, gap counterexample fails.
    const ExperimentConfig full = preset_config("decaying");
    const Trajectory tr = integrate(g, s0, bd, full.solver, full.output_times);
    const LyapunovResult ly = lyapunov_limit_check(tr, bd, full.solver.eos);
    c.require(ly.converged, "decaying preset: Lyapunov check did not converge (spread " + num(ly.tail_spread) + ")");
    std::vector<double> t, e, se, pot;
    for (int k = 0; k <= 30; ++k) {
      t.push_back(k);
      e.push_back(2.5 + std::exp(-0.5 * k));
      se.push_back(2.4 + std::exp(-0.5 * k));
      pot.push_back(0.0);
    }
    const LyapunovResult gap = lyapunov_limit_check(t, e, se, pot);
    c.require(!gap.converged, "gap counterexample not detected");
    c.note("E_inf " + num(ly.e_infinity) + ", tail spread " + num(ly.tail_spread) + ", counterexample gap " +
           num(gap.state_gap));
  });
}

CriterionResult verify_reproducibility(const VerifyOptions& o) {
  return run_criterion(11, "Reproducibility", 0.0, [&](Checks& c) {
    const fs::path root = o.scratch;
    fs::remove_all(root);
    CommandOptions co;
    co.workers = o.workers;
    ExperimentConfig sim = preset_config("decaying");
    sim.output_times = {0.0, 1.0, 2.0, 3.0, 4.0};
    ExperimentConfig ens = preset_config("decaying");
    ens.output_times = {0.0, 0.5, 1.0};
    ens.ensemble.atoms = 4;
    ens.seed = 5;
    ExperimentConfig mms = preset_config("mms");
    mms.mms.resolutions = {16, 32};
    ExperimentConfig sel = preset_config("decaying");
    sel.output_times = {0.0, 0.5, 1.0, 1.5, 2.0};
    ExperimentConfig cont = preset_config("decaying");
    cont.continuity.n_max = 3;
    cont.continuity.horizon = 0.2;
    cont.continuity.outputs = 4;
    cont.ensemble.atoms = 2;

    struct Run {
      const char* name;
      ExperimentConfig cfg;
      int (*cmd)(const ExperimentConfig&, const fs::path&, const CommandOptions&);
    };
    const Run runs[] = {{"simulate", sim, cmd_simulate},
                        {"mms", mms, cmd_simulate},
                        {"ensemble", ens, cmd_ensemble},
                        {"select", sel, cmd_select},
                        {"continuity", cont, cmd_continuity}};
    for (const Run& r : runs) {
      const fs::path first = root / r.name / "first", second = root / r.name / "second";
      r.cmd(r.cfg, first, co);
      const ExperimentConfig again = load_config(first / "config.json");
      c.require(canonical_json(again) == read_file(first / "config.json"),
                std::string(r.name) + ": config does not round-trip");
      CommandOptions co2 = co;
      co2.workers = o.workers == 1 ? 2 : 1;
      r.cmd(again, second, co2);
      const auto check = check_archive(first);
      c.require(check.ok, std::string(r.name) + ": manifest check failed");
      c.require(archive_hashes(first) == archive_hashes(second),
                std::string(r.name) + ": re-run hashes differ");
    }
    // Distance over the two ensemble archives.
    ExperimentConfig dist = ens;
    const fs::path ea = root / "ensemble" / "first", eb = root / "ensemble" / "second";
    cmd_distance(dist, ea, eb, root / "distance" / "first", co);
    cmd_distance(load_config(root / "distance" / "first" / "config.json"), ea, eb,
                 root / "distance" / "second", co);
    c.require(archive_hashes(root / "distance" / "first") == archive_hashes(root / "distance" / "second"),
              "distance: re-run hashes differ");
    c.note("6 archives re-run with identical hashes");
  });
}

std::vector<CriterionResult> run_acceptance(const VerifyOptions& o, const std::vector<int>& only) {
  using Fn = CriterionResult (*)(const VerifyOptions&);
  const Fn all[] = {verify_bregman,         verify_eos,
                    verify_conservation,    verify_mms,
                    verify_energy_inequality, verify_statistical_inequality,
                    verify_markov,          verify_transport,
                    verify_continuity,      verify_selection,
                    verify_reproducibility};
  std::vector<CriterionResult> out;
  for (int id = 1; id <= 11; ++id) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    out.push_back(all[id - 1](o));
    if (o.log) *o.log << format_result(out.back()) << std::endl;
  }
  return out;
}

std::string format_result(const CriterionResult& r) {
  char head[128];
  std::snprintf(head, sizeof head, "%s %2d %s (%.2f s)", r.passed ? "PASS" : "FAIL", r.id,
                r.title.c_str(), r.seconds);
  return r.detail.empty() ? std::string(head) : std::string(head) + ": " + r.detail;
}

}  // namespace statns
