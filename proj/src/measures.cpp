#include "statns/measures.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "statns/error.hpp"

namespace statns {

DataPoint make_data_point(const Grid& grid, FieldState state, BoundaryData bd, const EosParams& eos) {
  const auto e = total_energy(state, bd, grid, eos);
  if (!e) throw PreconditionError("data point has infinite energy");
  return DataPoint{std::move(state), std::move(bd), *e};
}

void Ensemble::validate() const {
  if (atoms.empty()) throw PreconditionError("ensemble: no atoms");
  if (weights.size() != atoms.size()) throw PreconditionError("ensemble: weight count mismatch");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw PreconditionError("ensemble: negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw PreconditionError("ensemble: weights do not sum to 1");
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    if (atoms[k].state.size() != grid.cell_count()) {
      throw PreconditionError("ensemble: atom " + std::to_string(k) + " does not match the grid");
    }
  }
}

Ensemble dirac(const Grid& grid, DataPoint point) {
  Ensemble e;
  e.grid = grid;
  e.atoms.push_back(std::move(point));
  e.weights = {1.0};
  return e;
}

Ensemble mixture(const std::vector<Ensemble>& parts, const std::vector<double>& alphas) {
  if (parts.empty() || parts.size() != alphas.size()) {
    throw PreconditionError("mixture: parts and coefficients differ in length");
  }
  Ensemble out;
  out.grid = parts.front().grid;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (!(parts[k].grid == out.grid)) throw PreconditionError("mixture: grids differ");
    for (std::size_t i = 0; i < parts[k].size(); ++i) {
      out.atoms.push_back(parts[k].atoms[i]);
      out.weights.push_back(alphas[k] * parts[k].weights[i]);
    }
  }
  out.validate();
  return out;
}

std::vector<double> resolve_atom_dt(const Ensemble& ens, const SolverConfig& cfg,
                                    std::span<const double> output_times) {
  std::vector<double> dt;
  dt.reserve(ens.size());
  for (const auto& a : ens.atoms) dt.push_back(resolve_dt(ens.grid, a.state, a.bd, cfg, output_times));
  return dt;
}

std::vector<Trajectory> propagate(const Ensemble& ens, std::span<const double> output_times,
                                  const SolverConfig& cfg, const PropagateOptions& options) {
  ens.validate();
  if (!options.atom_dt.empty() && options.atom_dt.size() != ens.size()) {
    throw PreconditionError("propagate: atom_dt size mismatch");
  }
  const std::size_t n = ens.size();
  std::vector<Trajectory> out(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        SolverConfig c = cfg;
        if (!options.atom_dt.empty()) c.dt = options.atom_dt[k];
        IntegrateOptions io;
        io.initial_energy = ens.atoms[k].energy;
        io.forcing = options.forcing;
        out[k] = integrate(ens.grid, ens.atoms[k].state, ens.atoms[k].bd, c, output_times, io);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  unsigned workers = options.workers ? options.workers : std::thread::hardware_concurrency();
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!errors[k]) continue;
    try {
      std::rethrow_exception(errors[k]);
    } catch (const PreconditionError& e) {
      throw PreconditionError("atom " + std::to_string(k) + ": " + e.what());
    } catch (const std::exception& e) {
      throw SolverError("atom " + std::to_string(k) + ": " + e.what());
    }
  }
  return out;
}

double output_energy(const Trajectory& traj, std::size_t k, const BoundaryData& bd,
                     const EosParams& eos) {
  if (traj.branches[k].empty()) return traj.energy_trace.value(traj.times[k]);
  return total_energy(traj.states[k], bd, traj.grid, eos)
      .value_or(std::numeric_limits<double>::infinity());
}

Ensemble pushforward(const Ensemble& ens, double t, const SolverConfig& cfg,
                     const PropagateOptions& options) {
  if (!(t >= 0.0)) throw PreconditionError("pushforward: negative time");
  const double times[] = {t};
  const auto traj = propagate(ens, times, cfg, options);
  Ensemble out;
  out.grid = ens.grid;
  out.weights = ens.weights;
  out.atoms.reserve(ens.size());
  for (std::size_t k = 0; k < ens.size(); ++k) {
    out.atoms.push_back(DataPoint{traj[k].states.back(), ens.atoms[k].bd,
                                  output_energy(traj[k], 0, ens.atoms[k].bd, cfg.eos)});
  }
  return out;
}

double semigroup_residual(const Ensemble& ens, double t, double s, const SolverConfig& cfg,
                          const PropagateOptions& options) {
  if (!(t >= 0.0) || !(s >= 0.0)) throw PreconditionError("semigroup_residual: negative time");
  PropagateOptions opt = options;
  if (opt.atom_dt.empty()) opt.atom_dt = resolve_atom_dt(ens, cfg, {});
  const Ensemble direct = pushforward(ens, t + s, cfg, opt);
  const Ensemble composed = pushforward(pushforward(ens, s, cfg, opt), t, cfg, opt);
  double worst = 0.0;
  for (std::size_t k = 0; k < ens.size(); ++k) {
    worst = std::max(worst, l2_distance(direct.atoms[k].state, composed.atoms[k].state, ens.grid));
  }
  return worst;
}

ObservablePoint observe(const FieldState& state, double energy, const SpectralBasis& basis) {
  return ObservablePoint{project_scalar(state.rho, basis), project_vector(state.mom, basis), energy};
}

double expectation(const Ensemble& ens, const Observable& phi, const SpectralBasis& basis) {
  ens.validate();
  double sum = 0.0;
  for (std::size_t k = 0; k < ens.size(); ++k) {
    sum += ens.weights[k] * phi.value(observe(ens.atoms[k].state, ens.atoms[k].energy, basis));
  }
  return sum;
}

Observable constant_observable(double c) {
  return Observable{[c](const ObservablePoint&) { return c; },
                    [](const ObservablePoint& x) {
                      return ObservableGradient{std::vector<double>(x.r.size(), 0.0),
                                                std::vector<double>(x.w.size(), 0.0), 0.0};
                    }};
}

Observable energy_observable() {
  return Observable{[](const ObservablePoint& x) { return x.e; },
                    [](const ObservablePoint& x) {
                      return ObservableGradient{std::vector<double>(x.r.size(), 0.0),
                                                std::vector<double>(x.w.size(), 0.0), 1.0};
                    }};
}

Observable mass_observable(std::vector<double> linear, std::vector<double> quadratic) {
  auto coef = [](const std::vector<double>& v, std::size_t i) { return i < v.size() ? v[i] : 0.0; };
  return Observable{
      [=](const ObservablePoint& x) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.r.size(); ++i) {
          s += coef(linear, i) * x.r[i] + 0.5 * coef(quadratic, i) * x.r[i] * x.r[i];
        }
        return s;
      },
      [=](const ObservablePoint& x) {
        ObservableGradient g{std::vector<double>(x.r.size()), std::vector<double>(x.w.size(), 0.0),
                             0.0};
        for (std::size_t i = 0; i < x.r.size(); ++i) {
          g.dr[i] = coef(linear, i) + coef(quadratic, i) * x.r[i];
        }
        return g;
      }};
}

std::function<double(double)> hat_function(double a, double b) {
  if (!(b > a)) throw PreconditionError("hat_function: empty support");
  return [a, b](double t) {
    if (t <= a || t >= b) return 0.0;
    const double m = 0.5 * (a + b);
    return t <= m ? (t - a) / (m - a) : (b - t) / (b - m);
  };
}

namespace {

double dot_vec(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l1(const std::vector<double>& a) {
  double s = 0.0;
  for (double v : a) s += std::abs(v);
  return s;
}

}  // namespace

StatisticalResidual trajectory_energy_residual(const Trajectory& traj, const BoundaryData& bd,
                                               const SolverConfig& cfg,
                                               const SpectralBasis& basis, const Observable& phi,
                                               const std::function<double(double)>& psi) {
  if (!phi.value || !phi.gradient) throw PreconditionError("observable needs value and gradient");
  StatisticalResidual out;
  const std::size_t steps = traj.steps.size();
  if (steps == 0) return out;
  const double t_final = traj.steps.back().t + traj.steps.back().dt;
  if (psi(t_final) != 0.0) {
    throw PreconditionError("test function must vanish at the end of the trajectory");
  }
  const Forcing* forcing = traj.forcing.get();
  const auto& left = traj.energy_trace.left();
  const double e_scale = std::max(1.0, std::abs(traj.energy_trace.initial_value()));

  auto point = [&](std::size_t n) {
    const FieldState& s = n < steps ? traj.steps[n].begin : traj.final_state;
    return observe(s, left[n], basis);
  };
  struct Rates {
    std::vector<double> r, w;
  };
  auto rates = [&](const FieldState& s, double t) {
    const RhsTerms rhs = evaluate_rhs(traj.grid, s, bd, cfg, t, forcing);
    return Rates{project_scalar(rhs.drho, basis), project_vector(rhs.dmom, basis)};
  };

  ObservablePoint x0 = point(0);
  double phi0 = phi.value(x0);
  std::optional<Rates> f0;
  for (std::size_t n = 0; n < steps; ++n) {
    const StepRecord& rec = traj.steps[n];
    ObservablePoint x1 = point(n + 1);
    const double phi1 = phi.value(x1);
    const double w = psi(rec.t);
    if (!(w >= 0.0)) throw PreconditionError("test function must be nonnegative");
    ObservablePoint mid{x0.r, x0.w, 0.5 * (x0.e + x1.e)};
    for (std::size_t i = 0; i < mid.r.size(); ++i) mid.r[i] = 0.5 * (x0.r[i] + x1.r[i]);
    for (std::size_t i = 0; i < mid.w.size(); ++i) mid.w[i] = 0.5 * (x0.w[i] + x1.w[i]);
    const ObservableGradient g = phi.gradient(mid);
    if (g.de < 0.0) throw PreconditionError("observable must be nondecreasing in the energy");
    const bool needs_rates = w != 0.0 && (l1(g.dr) > 0.0 || l1(g.dw) > 0.0);
    if (needs_rates) {
      if (!f0) f0 = rates(rec.begin, rec.t);
      Rates f1 = rates(traj.step_end(n), rec.t + rec.dt);
      std::vector<double> fr(f1.r.size()), fw(f1.w.size());
      for (std::size_t i = 0; i < fr.size(); ++i) fr[i] = 0.5 * (f0->r[i] + f1.r[i]);
      for (std::size_t i = 0; i < fw.size(); ++i) fw[i] = 0.5 * (f0->w[i] + f1.w[i]);
      out.mass_part += w * rec.dt * dot_vec(g.dr, fr);
      out.momentum_part += w * rec.dt * dot_vec(g.dw, fw);
      f0 = std::move(f1);
    } else {
      f0.reset();
    }
    const auto& tm = rec.terms;
    const double energy_rate = -(tm.dissipation + tm.boundary_out + tm.boundary_in) + tm.source;
    out.energy_part += w * rec.dt * g.de * energy_rate;
    out.residual += w * (phi1 - phi0);
    out.tolerance += w * (g.de * kEnergyTolerance * e_scale +
                          (l1(g.dr) + l1(g.dw)) * kProjectionTolerance * rec.dt);
    x0 = std::move(x1);
    phi0 = phi1;
  }
  out.residual -= out.mass_part + out.momentum_part + out.energy_part;
  out.tolerance *= 10.0;
  return out;
}

StatisticalResidual statistical_energy_inequality_residual(
    const Ensemble& ens0, const std::vector<Trajectory>& trajectories, const Observable& phi,
    const std::function<double(double)>& psi, const SolverConfig& cfg, const SpectralBasis& basis) {
  ens0.validate();
  if (trajectories.size() != ens0.size()) {
    throw PreconditionError("statistical residual: one trajectory per atom required");
  }
  StatisticalResidual out;
  for (std::size_t k = 0; k < ens0.size(); ++k) {
    const auto r =
        trajectory_energy_residual(trajectories[k], ens0.atoms[k].bd, cfg, basis, phi, psi);
    const double w = ens0.weights[k];
    out.residual += w * r.residual;
    out.tolerance += w * r.tolerance;
    out.mass_part += w * r.mass_part;
    out.momentum_part += w * r.momentum_part;
    out.energy_part += w * r.energy_part;
  }
  return out;
}

StatisticalResidual statistical_energy_inequality_residual(
    const Ensemble& ens0, const Observable& phi, const std::function<double(double)>& psi,
    double t_end, const SolverConfig& cfg, const SpectralBasis& basis,
    const PropagateOptions& options) {
  const double times[] = {0.0, t_end};
  const auto traj = propagate(ens0, times, cfg, options);
  return statistical_energy_inequality_residual(ens0, traj, phi, psi, cfg, basis);
}

double uniform01(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

Ensemble sample_fourier(const Grid& grid, const BoundaryData& bd, const FourierSampler& sampler,
                        std::size_t atoms, const EosParams& eos) {
  if (atoms == 0) throw PreconditionError("sample_fourier: no atoms requested");
  if (sampler.modes < 1) throw PreconditionError("sample_fourier: modes must be positive");
  if (!(sampler.rho_mean > 0.0) || !(sampler.rho_amplitude >= 0.0) ||
      !(sampler.rho_amplitude < 1.0) || !(sampler.mom_amplitude >= 0.0)) {
    throw PreconditionError("sample_fourier: invalid amplitudes");
  }
  std::mt19937_64 rng(sampler.seed);
  auto coef = [&] { return 2.0 * uniform01(rng()) - 1.0; };
  const int km = sampler.modes;
  const int lm = grid.dim == 2 ? sampler.modes : 1;
  const double lx = grid.extents[0], ly = grid.extents[1];

  Ensemble ens;
  ens.grid = grid;
  for (std::size_t a = 0; a < atoms; ++a) {
    // Density: cos(k pi x) cos(l pi y) for k + l >= 1; momentum: sin(k pi x) sin(l pi y).
    std::vector<double> cr, cm0, cm1;
    for (int l = 0; l <= lm; ++l) {
      for (int k = 0; k <= km; ++k) {
        cr.push_back((k + l == 0 || (grid.dim == 1 && l > 0)) ? 0.0 : coef() / (1.0 + k + l));
      }
    }
    for (int l = 1; l <= lm; ++l) {
      for (int k = 1; k <= km; ++k) {
        cm0.push_back(coef() / (k + l));
        cm1.push_back(grid.dim == 2 ? coef() / (k + l) : 0.0);
      }
    }
    const double sr = std::max(l1(cr), 1e-300);
    const double sm = std::max({l1(cm0), l1(cm1), 1e-300});
    FieldState s(grid.cell_count());
    for (std::size_t c = 0; c < s.size(); ++c) {
      const Vec2 x = grid.cell_center(c);
      double pr = 0.0, p0 = 0.0, p1 = 0.0;
      std::size_t q = 0;
      for (int l = 0; l <= lm; ++l) {
        for (int k = 0; k <= km; ++k, ++q) {
          pr += cr[q] * std::cos(k * M_PI * x[0] / lx) * std::cos(l * M_PI * x[1] / ly);
        }
      }
      q = 0;
      for (int l = 1; l <= lm; ++l) {
        for (int k = 1; k <= km; ++k, ++q) {
          const double sx = std::sin(k * M_PI * x[0] / lx);
          const double b = grid.dim == 2 ? sx * std::sin(l * M_PI * x[1] / ly) : sx;
          p0 += cm0[q] * b;
          p1 += cm1[q] * b;
        }
      }
      s.rho[c] = sampler.rho_mean * (1.0 + sampler.rho_amplitude * pr / sr);
      s.mom[c] = {sampler.mom_amplitude * p0 / sm + s.rho[c] * bd.u_cell[c][0],
                  sampler.mom_amplitude * p1 / sm + s.rho[c] * bd.u_cell[c][1]};
    }
    ens.atoms.push_back(make_data_point(grid, std::move(s), bd, eos));
  }
  ens.weights.assign(atoms, 1.0 / static_cast<double>(atoms));
  // Restore an exact unit sum after rounding.
  ens.weights.back() = 1.0 - std::accumulate(ens.weights.begin(), ens.weights.end() - 1, 0.0);
  return ens;
}

}  // namespace statns
