#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "statns/eos.hpp"
#include "statns/grid.hpp"

namespace statns {

struct SolverConfig {
  double mu = 0.01;      ///< shear viscosity, > 0
  double lambda = 0.01;  ///< bulk viscosity, >= 0
  EosParams eos{};
  double cfl = 0.4;
  double t_end = 1.0;
  double artificial_dissipation = 1.0;  ///< scales the Rusanov wave-speed bound
  /// Fixed macro time step. Zero selects 0.9 * stable_dt(initial state) at integration start.
  double dt = 0.0;

  void validate() const;
};

/// Time-dependent overrides used by manufactured-solution runs. Unset members fall back to the
/// static BoundaryData.
struct Forcing {
  std::function<Vec2(double, Vec2)> force;
  std::function<double(double, Vec2)> inflow_density;
};

/// Evaluated right-hand side of the semi-discrete system for one state.
struct RhsTerms {
  std::vector<double> drho;
  std::vector<Vec2> dmom;
  double dissipation = 0.0;   ///< sum over vertices of S(Du):Du, weighted
  double boundary_out = 0.0;  ///< sum over outflow faces of P(rho) u_B.n |f|
  double boundary_in = 0.0;   ///< sum over inflow faces of P(rho_B) u_B.n |f|
  double source = 0.0;        ///< right-hand side of the energy balance
  double mass_outflux = 0.0;  ///< net mass leaving through the boundary per unit time
};

RhsTerms evaluate_rhs(const Grid& grid, const FieldState& state, const BoundaryData& bd,
                      const SolverConfig& cfg, double t = 0.0, const Forcing* forcing = nullptr);

/// Largest admissible step for `state`: cfl * min(convective bound, viscous bound).
double stable_dt(const Grid& grid, const FieldState& state, const BoundaryData& bd,
                 const SolverConfig& cfg);

/// Stage-averaged balance terms of one RK2 step (rates, i.e. per unit time).
struct StepTerms {
  double dissipation = 0.0;
  double boundary_out = 0.0;
  double boundary_in = 0.0;
  double source = 0.0;
  double mass_outflux = 0.0;
};

struct StepOutcome {
  FieldState state;
  StepTerms terms;
  bool rejected = false;
  std::string diagnostic;
};

/// One Heun (RK2) step. A negative density in the result marks the step as rejected; NaN throws
/// SolverError.
StepOutcome step(const Grid& grid, const FieldState& state, const BoundaryData& bd,
                 const SolverConfig& cfg, double dt, double t = 0.0,
                 const Forcing* forcing = nullptr);

/// Left-continuous piecewise-linear energy trace with recorded (downward) jumps.
///
/// Breakpoints t_0 < t_1 < ...; left[k] = E(t_k-) and right[k] = E(t_k+). The value at t_k is
/// left[k]; between breakpoints the trace interpolates linearly from right[k] to left[k+1].
/// Before t_0 it equals the initial value E_0 (the extension E(0-) = E_0), after the last
/// breakpoint it stays at right.back().
class EnergyTrace {
 public:
  EnergyTrace() = default;
  /// Sets left[0] = initial and clamps right[0] <= initial. Throws PreconditionError when times
  /// are not increasing or a later jump goes upward by more than `jump_tolerance`.
  EnergyTrace(double initial, std::vector<double> times, std::vector<double> left,
              std::vector<double> right, double jump_tolerance = 0.0);

  double initial_value() const { return initial_; }
  double value(double t) const;
  double right_limit(double t) const;
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& left() const { return left_; }
  const std::vector<double>& right() const { return right_; }
  double total_variation() const;
  bool empty() const { return times_.empty(); }

 private:
  double initial_ = 0.0;
  std::vector<double> times_, left_, right_;
};

/// One accepted RK2 (sub)step.
struct StepRecord {
  double t = 0.0;
  double dt = 0.0;
  FieldState begin;
  StepTerms terms;
  double energy_begin = 0.0;
  double energy_end = 0.0;
  double mass_residual = 0.0;
  double momentum_residual = 0.0;
  double energy_residual = 0.0;  ///< R = dE + dt (D + B_out + B_in - S)
};

struct Trajectory {
  Grid grid;
  std::vector<double> times;
  std::vector<FieldState> states;
  EnergyTrace energy_trace;
  std::vector<StepRecord> steps;
  FieldState final_state;  ///< state after the last recorded step
  double dt = 0.0;         ///< macro step
  std::shared_ptr<const Forcing> forcing;
  /// Per output: side-branch steps from the preceding grid state (empty when on the grid).
  std::vector<std::vector<StepRecord>> branches;
  /// Per output: number of grid steps taken before its base grid state.
  std::vector<std::size_t> base_step;

  const FieldState& step_end(std::size_t n) const {
    return n + 1 < steps.size() ? steps[n + 1].begin : final_state;
  }
  /// Energies of the stored output states.
  std::vector<double> output_energies(const BoundaryData& bd, const EosParams& eos) const;
};

struct IntegrateOptions {
  std::optional<double> initial_energy;  ///< E_0 >= energy of the initial state
  std::shared_ptr<const Forcing> forcing;
  int max_halvings = 8;
};

/// Integrates on the fixed time grid k * dt up to the last output time. Output times off the grid
/// are served by a partial step branching from the preceding grid state, so the grid trajectory
/// does not depend on the requested outputs. Throws SolverError after `max_halvings` failed
/// halvings of a step.
Trajectory integrate(const Grid& grid, const FieldState& initial, const BoundaryData& bd,
                     const SolverConfig& cfg, std::span<const double> output_times,
                     const IntegrateOptions& options = {});

/// Resolves the macro step that `integrate` would use for `initial`. Without an explicit cfg.dt the
/// step is 0.9 * stable_dt, shortened so that outputs spaced by a common increment land on the grid.
double resolve_dt(const Grid& grid, const FieldState& initial, const BoundaryData& bd,
                  const SolverConfig& cfg, std::span<const double> output_times = {});

/// Per-step energy tolerance: 1e-8 relative to the initial energy.
inline constexpr double kEnergyTolerance = 1e-8;

/// Energy-inequality residuals per output interval:
///   R_k = E(t_{k+1}) - E(t_k) + int (D + B_out + B_in - S) dt,
/// accumulated from the step records. The discrete inequality holds when R_k <= tol.
std::vector<double> energy_inequality_residual(const Trajectory& traj, const BoundaryData& bd,
                                               const SolverConfig& cfg);

/// Mass change minus net boundary inflow per output interval.
std::vector<double> mass_balance_residual(const Trajectory& traj, const BoundaryData& bd);

/// Projected continuity identity d/dt int rho r_i = int m . grad r_i per step, with the right side
/// from the scheme's numerical fluxes at the step end points (trapezoid). Row n, column i.
std::vector<std::vector<double>> projected_mass_residual(const Trajectory& traj,
                                                         const BoundaryData& bd,
                                                         const SolverConfig& cfg,
                                                         const SpectralBasis& basis);

/// Quadrature of int [rho u(x)u : grad w + p div w - S(Du) : grad w + rho g . w] for one state,
/// using cell values and exact mode gradients.
std::vector<double> momentum_projection_rhs(const Grid& grid, const FieldState& state,
                                            const BoundaryData& bd, const SolverConfig& cfg,
                                            const SpectralBasis& basis, double t = 0.0,
                                            const Forcing* forcing = nullptr);

/// Residual of the projected momentum equation per output interval (rows) and vector mode
/// (columns); time integral by the trapezoid rule over steps.
std::vector<std::vector<double>> momentum_projection_residual(const Trajectory& traj,
                                                              const BoundaryData& bd,
                                                              const SolverConfig& cfg,
                                                              const SpectralBasis& basis);

/// Cell velocity m / rho; cells below the vacuum threshold take the lifted u_B.
std::vector<Vec2> velocity_field(const FieldState& state, const BoundaryData& bd);

/// Relative energy int E(rho, m | rho_t, m_t) dx between two states on one grid.
EnergyValue integrated_relative_energy(const FieldState& state, const FieldState& reference,
                                       const Grid& grid, const EosParams& eos);

}  // namespace statns
