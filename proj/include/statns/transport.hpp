#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "statns/measures.hpp"

namespace statns {

/// Dense n1 x n2 relative-energy costs. Rows come from the first ("weak") ensemble, columns from
/// the second ("strong") one. Infinite entries are flagged and never carry mass.
struct CostMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> entries;  ///< row-major; meaningless where `infinite` is set
  std::vector<char> infinite;

  CostMatrix() = default;
  CostMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), entries(r * c, 0.0), infinite(r * c, 0) {}
  static CostMatrix from_dense(std::size_t r, std::size_t c, std::vector<double> values);

  double at(std::size_t i, std::size_t j) const { return entries[i * cols + j]; }
  bool is_finite(std::size_t i, std::size_t j) const { return !infinite[i * cols + j]; }
};

/// cost[i][j] = int E(rho_i, m_i | rho~_j, m~_j) dx by cell quadrature. Requires a shared grid,
/// equal boundary data for all atoms and strictly positive column densities.
CostMatrix build_cost_matrix(const Ensemble& ens1, const Ensemble& ens2, const EosParams& eos,
                             unsigned workers = 0);

struct TransportPlan {
  std::size_t rows = 0, cols = 0;
  std::vector<double> coupling;  ///< row-major

  double at(std::size_t i, std::size_t j) const { return coupling[i * cols + j]; }
  /// max |row sums - a|, |col sums - b|
  double marginal_violation(const std::vector<double>& a, const std::vector<double>& b) const;
};

struct TransportResult {
  double value = 0.0;  ///< +inf when no finite-cost coupling exists
  TransportPlan plan;
  bool finite = true;
  /// Dual potentials (u_i + v_j <= c_ij with equality on the support) for the exact solver.
  std::vector<double> u, v;
};

/// Exact optimal transport on the transportation polytope by successive shortest augmenting paths
/// (Dijkstra with reduced costs) on the bipartite flow network.
TransportResult we_distance_exact(const std::vector<double>& a, const std::vector<double>& b,
                                  const CostMatrix& cost);
TransportResult we_distance_exact(const Ensemble& ens1, const Ensemble& ens2, const CostMatrix& cost);

struct EntropicResult {
  double value = 0.0;  ///< <C, P> of the returned (feasible) plan
  TransportPlan plan;
  std::size_t iterations = 0;
  bool converged = false;
  double marginal_violation = 0.0;  ///< of the Sinkhorn iterate before the feasibility projection
  double entropy_bound = 0.0;  ///< epsilon * log(n1 n2)
};

/// Log-domain Sinkhorn iterations with epsilon scaling for the entropic problem with
/// regularization `epsilon`. The final iterate is projected onto the transport polytope so the
/// returned plan is always feasible. Non-convergence within `max_iter` is flagged, not fatal.
EntropicResult we_distance_entropic(const std::vector<double>& a, const std::vector<double>& b,
                                    const CostMatrix& cost, double epsilon,
                                    std::size_t max_iter = 100000, double tolerance = 1e-9);

/// (W_E(nu1, nu2), W_E(nu2, nu1)) by the exact solver.
std::pair<double, double> asymmetry_report(const Ensemble& ens1, const Ensemble& ens2,
                                           const EosParams& eos);

struct ContinuityConfig {
  std::vector<double> deltas;        ///< perturbation scales delta_n
  std::vector<double> output_times;  ///< sup over these times, all in [0, T]
  double horizon = 1.0;              ///< T
  double band = 4.0;                 ///< L: base densities must stay in [1/L, L]
  int modes = 2;                     ///< Fourier modes of the perturbation direction
  std::uint64_t seed = 1;
  unsigned workers = 0;
};

struct ContinuityRow {
  int n = 0;
  double delta = 0.0;
  double initial_distance = 0.0;  ///< W_E(nu_n, nu)
  double sup_distance = 0.0;      ///< sup_t W_E(M_t nu_n, M_t nu)
  double ratio = 0.0;             ///< sup_distance / initial_distance (0 when both vanish)
  double w1_density = 0.0;        ///< sup_t sum P_ij ||rho_i - rho~_j||_L2 with the same plans
  double rho_min = 0.0, rho_max = 0.0;  ///< realized band of the perturbed runs
};

struct ContinuityReport {
  std::vector<ContinuityRow> rows;
  bool valid = true;
  std::string diagnostic;
  double base_rho_min = 0.0, base_rho_max = 0.0;
  double max_ratio = 0.0;
  double log_ratio_slope = 0.0;  ///< least-squares slope of log(ratio) against n (rows with ratio > 0)
  bool monotone = true;          ///< sup_distance strictly decreasing along the rows
};

/// Bump direction shared by every nu_n: density factor 1 + delta b(x) with |b| <= 1/2 and
/// momentum increment delta m_b(x) built from low cosine / sine modes.
FieldState perturbation_direction(const Grid& grid, int modes, std::uint64_t seed);

ContinuityReport continuity_experiment(const Ensemble& nu, const ContinuityConfig& config,
                                       const SolverConfig& cfg);

/// CSV with columns n,delta,w_initial,sup_e,ratio,w1_density,rho_min,rho_max.
std::string continuity_csv(const ContinuityReport& report);
/// JSON metadata of the report (validity, band, slope, constants).
std::string continuity_json(const ContinuityReport& report, const ContinuityConfig& config);

}  // namespace statns
