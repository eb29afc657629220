#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "statns/grid.hpp"
#include "statns/solver.hpp"

namespace statns {

/// Point of the data space: state, boundary data and the energy component of the extended point.
struct DataPoint {
  FieldState state;
  BoundaryData bd;
  double energy = 0.0;  ///< E_0 for initial data, the trace value E_cg(t) after a pushforward
};

/// Builds a data point with energy = int E(rho, m | u_B). Throws PreconditionError when the
/// energy is infinite.
DataPoint make_data_point(const Grid& grid, FieldState state, BoundaryData bd, const EosParams& eos);

/// Finitely supported probability measure on the data space.
struct Ensemble {
  Grid grid;
  std::vector<DataPoint> atoms;
  std::vector<double> weights;

  std::size_t size() const { return atoms.size(); }
  /// Throws PreconditionError unless weights are nonnegative, sum to 1 within 1e-12, and every atom
  /// lives on `grid`.
  void validate() const;
};

Ensemble dirac(const Grid& grid, DataPoint point);
/// Convex combination sum alpha_k nu_k of ensembles on one grid (atoms concatenated).
Ensemble mixture(const std::vector<Ensemble>& parts, const std::vector<double>& alphas);

struct PropagateOptions {
  unsigned workers = 0;  ///< 0 = hardware concurrency
  /// Per-atom macro steps; empty resolves each atom's step from its own initial state.
  std::vector<double> atom_dt;
  std::shared_ptr<const Forcing> forcing;
};

/// Integrates every atom to `output_times`. Atoms run in parallel, results are stored by index.
/// A failing atom aborts with SolverError naming its index.
std::vector<Trajectory> propagate(const Ensemble& ens, std::span<const double> output_times,
                                  const SolverConfig& cfg, const PropagateOptions& options = {});

/// Macro step `integrate` resolves for each atom when asked for `output_times`.
std::vector<double> resolve_atom_dt(const Ensemble& ens, const SolverConfig& cfg,
                                    std::span<const double> output_times);

/// Energy component at output k: the trace value on the time grid, the state energy of the branch
/// end otherwise.
double output_energy(const Trajectory& traj, std::size_t k, const BoundaryData& bd,
                     const EosParams& eos);

/// M_t: each atom replaced by its state at t, energy by E_cg(t); weights and boundary data kept.
Ensemble pushforward(const Ensemble& ens, double t, const SolverConfig& cfg,
                     const PropagateOptions& options = {});

/// max over atoms of || M_{t+s} nu - M_t M_s nu ||_{L2}. The macro step of each atom is resolved
/// once from `ens` (or taken from options) and shared by all three pushforwards.
double semigroup_residual(const Ensemble& ens, double t, double s, const SolverConfig& cfg,
                          const PropagateOptions& options = {});

/// Projected coordinates (r, w, e) of a data point.
struct ObservablePoint {
  std::vector<double> r;
  std::vector<double> w;
  double e = 0.0;
};

struct ObservableGradient {
  std::vector<double> dr;
  std::vector<double> dw;
  double de = 0.0;
};

/// Phi(r, w, e) with its gradient. An empty gradient callback is allowed for expectation().
struct Observable {
  std::function<double(const ObservablePoint&)> value;
  std::function<ObservableGradient(const ObservablePoint&)> gradient;
};

ObservablePoint observe(const FieldState& state, double energy, const SpectralBasis& basis);

/// sum_k weight_k Phi(atom_k), summed in atom order.
double expectation(const Ensemble& ens, const Observable& phi, const SpectralBasis& basis);

/// Common observables.
Observable constant_observable(double c);
Observable energy_observable();
/// Phi(r) = sum_i c_i r_i + 0.5 sum_i q_i r_i^2.
Observable mass_observable(std::vector<double> linear, std::vector<double> quadratic);

/// Per unit time and unit |grad Phi| quadrature tolerance of the projected mass and momentum rates.
inline constexpr double kProjectionTolerance = 1e-6;

/// Breakdown of the discrete statistical energy inequality.
struct StatisticalResidual {
  double residual = 0.0;   ///< LHS - RHS; the inequality holds when residual <= tolerance
  double tolerance = 0.0;  ///< tol_stat
  double mass_part = 0.0;  ///< contribution of the d Phi / d r terms
  double momentum_part = 0.0;
  double energy_part = 0.0;
};

/// Single-trajectory form. With psi_n = psi(t_n) at the grid steps, summation by parts turns the
/// distributional inequality into
///   sum_n psi_n [Phi(x_{n+1}) - Phi(x_n) - dt grad Phi(x_{n+1/2}) . (F_r, F_w, -D - B + S)] <= 0,
/// where x_n = (r_n, w_n, e_n), e_0 = E_0 and e_n the trace values, F_r, F_w the trapezoidal
/// projected mass and momentum rates, and D, B, S the stage-averaged balance terms.
/// Requires psi >= 0 with psi(t_end) = 0 and d Phi / d e >= 0 on the trajectory (checked).
StatisticalResidual trajectory_energy_residual(const Trajectory& traj, const BoundaryData& bd,
                                               const SolverConfig& cfg,
                                               const SpectralBasis& basis, const Observable& phi,
                                               const std::function<double(double)>& psi);

/// Ensemble form: the weighted sum of trajectory residuals over the atoms of `ens0`, with
/// trajectories integrated up to `t_end`.
StatisticalResidual statistical_energy_inequality_residual(
    const Ensemble& ens0, const Observable& phi, const std::function<double(double)>& psi,
    double t_end, const SolverConfig& cfg, const SpectralBasis& basis,
    const PropagateOptions& options = {});

/// Same, reusing trajectories already integrated for the atoms of `ens0`.
StatisticalResidual statistical_energy_inequality_residual(
    const Ensemble& ens0, const std::vector<Trajectory>& trajectories, const Observable& phi,
    const std::function<double(double)>& psi, const SolverConfig& cfg, const SpectralBasis& basis);

/// Hat function with support [a, b] peaking at the midpoint.
std::function<double(double)> hat_function(double a, double b);

/// Smooth random Fourier perturbations of a uniform state. Density modes are cosine products,
/// momentum modes sine products (vanishing at the walls); coefficients uniform in [-1, 1] and
/// scaled so that |rho - rho_mean| <= rho_amplitude * rho_mean and |m_a - rho u_B,a| <= mom_amplitude
/// with u_B the lifted boundary velocity.
struct FourierSampler {
  double rho_mean = 1.0;
  double rho_amplitude = 0.2;
  double mom_amplitude = 0.2;
  int modes = 3;
  std::uint64_t seed = 0;

  static constexpr const char* id = "fourier";
};

Ensemble sample_fourier(const Grid& grid, const BoundaryData& bd, const FourierSampler& sampler,
                        std::size_t atoms, const EosParams& eos);

/// Uniform double in [0, 1) from 53 bits of a 64-bit engine output; independent of the standard
/// library's distribution implementations.
double uniform01(std::uint64_t bits);

}  // namespace statns
