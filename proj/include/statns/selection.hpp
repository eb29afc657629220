#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "statns/solver.hpp"

namespace statns {

enum class EnergyOrder { less_or_equal, greater, incomparable };

const char* to_string(EnergyOrder order);

/// a < b in the energy relation: a(t) <= b(t) + tol for a.a. t. Traces are compared at the union of
/// their breakpoints in (0, max] through left and right limits, which decides the relation for
/// piecewise-linear traces. A trace is held at its last value beyond its last breakpoint.
EnergyOrder energy_order(const EnergyTrace& a, const EnergyTrace& b, double tol);
/// Trajectory form with tol = tol_E * max(1, E_0(a), E_0(b)). Throws PreconditionError when the
/// output time grids differ.
EnergyOrder energy_order(const Trajectory& a, const Trajectory& b);

/// a < b with a gap larger than tol somewhere (strict dominance on a set of positive measure).
bool strictly_dominates(const EnergyTrace& a, const EnergyTrace& b, double tol);

struct SelectionFunctional {
  double lambda = 1.0;
  /// Bounded, strictly increasing transform of the energy, with its sup norm.
  std::function<double(double)> beta = [](double e) { return std::atan(e); };
  double beta_sup = std::numbers::pi / 2.0;

  void validate() const;
  double default_horizon() const { return 5.0 / lambda; }
};

struct KrylovValue {
  double value = 0.0;       ///< int_0^H exp(-lambda t) beta(E_cg(t)) dt
  double tail_bound = 0.0;  ///< exp(-lambda H) sup|beta| / lambda
};

/// Quadrature of exp(-lambda t) beta(E_cg(t)) on [0, H]. On each interval between consecutive
/// nodes, beta(E_cg) is interpolated linearly between its one-sided limits at the two ends and
/// integrated against the exponential exactly. Nodes are the trace breakpoints, or `nodes` when
/// given; beyond the last breakpoint the last value is held. horizon <= 0 selects 5 / lambda.
KrylovValue krylov_value(const EnergyTrace& trace, const SelectionFunctional& f, double horizon = 0.0,
                         std::span<const double> nodes = {});
KrylovValue krylov_value(const Trajectory& traj, const SelectionFunctional& f, double horizon = 0.0);

struct Candidate {
  std::string id;          ///< provenance id, also the tie-break key
  std::string provenance;  ///< how the candidate was produced
  Trajectory trajectory;
};

struct CandidateFamily {
  std::vector<Candidate> candidates;
  BoundaryData bd;

  /// Nonempty, unique ids, shared grid, initial state and output times, and every per-step energy
  /// residual within tol_E.
  void validate() const;
};

struct SelectionReport {
  std::size_t selected = 0;
  std::vector<std::string> ids;
  std::vector<double> values;
  std::vector<std::vector<EnergyOrder>> order;  ///< order[i][j] = energy_order(i, j)
  bool audit_passed = true;  ///< no member strictly dominates the selected one
  double horizon = 0.0;
  double tail_bound = 0.0;
};

/// Minimizes the Krylov functional over the family (quadrature on the union of all breakpoints),
/// breaking ties by the lexicographically smallest id, then audits minimality by exhaustive
/// pairwise comparison.
SelectionReport select_maximal(const CandidateFamily& family, const SelectionFunctional& f,
                               double horizon = 0.0);

std::string selection_json(const SelectionReport& report);

struct LyapunovOptions {
  double tail_fraction = 0.25;  ///< share of the output times used for the tail average
  double tolerance = 1e-6;      ///< relative to max(1, |E_inf|)
};

struct LyapunovResult {
  double e_infinity = 0.0;
  bool converged = false;
  double tail_spread = 0.0;    ///< max - min of the augmented trace over the tail
  double tail_slope = 0.0;     ///< least-squares slope over the tail
  double state_gap = 0.0;      ///< |state energy - E_inf| at the last output
  bool monotone = true;        ///< augmented trace nonincreasing at outputs (within tolerance)
};

/// Core check on sampled data: trace values E_cg(t_k), state energies int E(rho, m | u_B)(t_k)
/// and potential terms int rho G (zeros when g = 0). The augmented energy is E - int rho G.
LyapunovResult lyapunov_limit_check(std::span<const double> times, std::span<const double> trace,
                                    std::span<const double> state_energy,
                                    std::span<const double> potential_energy,
                                    const LyapunovOptions& options = {});

/// Trajectory form. Requires u_B = 0 and g = 0 or a potential G with g = grad G.
LyapunovResult lyapunov_limit_check(const Trajectory& traj, const BoundaryData& bd,
                                    const EosParams& eos, const LyapunovOptions& options = {});

/// int rho G dx for the potential stored in `bd` (0 without a potential).
double potential_energy(const FieldState& state, const BoundaryData& bd, const Grid& grid);

}  // namespace statns
