#pragma once

#include <memory>

#include "statns/grid.hpp"
#include "statns/solver.hpp"

namespace statns {

/// 1D manufactured solution rho* = 2 + 0.1 sin(2 pi (x - t)), u* = 1 on [0, 1].
///
/// The body force g = a gamma rho^(gamma-2) d_x rho* balances the pressure gradient, the left
/// face takes the time-dependent inflow density rho*(t, 0) and u_B = 1 everywhere.
struct MmsProblem {
  EosParams eos{};

  static double density(double t, double x);
  static double density_x(double t, double x);

  Grid grid(int cells) const { return build_grid(1, {1.0, 1.0}, {cells, 1}); }
  BoundaryData boundary(const Grid& grid) const;
  std::shared_ptr<const Forcing> forcing() const;
  FieldState exact(const Grid& grid, double t) const;
  /// Discrete L1 error of the density against rho*(t, cell centres).
  double l1_error(const FieldState& state, const Grid& grid, double t) const;
};

}  // namespace statns
