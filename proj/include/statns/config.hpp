#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "statns/grid.hpp"
#include "statns/solver.hpp"

namespace statns {

struct GridSpec {
  int dim = 1;
  std::array<double, 2> extents{1.0, 1.0};
  std::array<int, 2> cells{32, 1};
};

/// Boundary presets:
///   wall     u_B = 0, g = 0
///   channel  u_B = (velocity, 0), rho_B = inflow_density, g = 0
///   gravity  u_B = 0, g = (gravity, 0) = grad G with G = gravity * x
///   mms      manufactured-solution data (1D only)
struct BoundarySpec {
  std::string kind = "wall";
  double inflow_density = 1.0;
  double velocity = 1.0;
  double gravity = 1.0;
  double rho_floor = 0.5;
};

/// Initial states:
///   uniform  rho = rho_mean, m = rho_mean u_B
///   wave     rho = rho_mean (1 + rho_amplitude cos(pi x) cos(pi y)),
///            m = mom_amplitude sin(pi x) sin(pi y) e_x (2D) or mom_amplitude sin(pi x) (1D),
///            plus rho u_B
///   mms      the manufactured solution at t = 0
struct InitialSpec {
  std::string kind = "wave";
  double rho_mean = 1.0;
  double rho_amplitude = 0.2;
  double mom_amplitude = 0.2;
};

/// kind = fourier samples `atoms` smooth perturbations; kind = dirac uses the initial state.
struct EnsembleSpec {
  std::string kind = "fourier";
  std::size_t atoms = 8;
  int modes = 3;
  double rho_amplitude = 0.2;
  double mom_amplitude = 0.2;
};

struct DistanceSpec {
  std::string method = "exact";  ///< exact | entropic
  double epsilon = 0.01;
  double time = 0.0;  ///< archived output time at which the ensembles are compared
};

struct ContinuitySpec {
  int n_max = 6;         ///< delta_n = 2^-n, n = 1..n_max
  std::vector<double> deltas;  ///< explicit delta_n, replaces the powers of two when nonempty
  double horizon = 0.5;  ///< T
  int outputs = 10;      ///< equally spaced output times in (0, T]
  double band = 4.0;     ///< L
  int modes = 2;
};

struct SelectionSpec {
  std::vector<double> dissipation_levels{1.0, 2.0, 4.0};
  std::vector<double> lambdas{1.0};
  double horizon = 0.0;  ///< 0 selects 5 / lambda
};

struct MmsSpec {
  std::vector<int> resolutions{32, 64, 128};
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string preset = "custom";
  GridSpec grid;
  SolverConfig solver;
  BoundarySpec boundary;
  InitialSpec initial;
  EnsembleSpec ensemble;
  DistanceSpec distance;
  ContinuitySpec continuity;
  SelectionSpec selection;
  MmsSpec mms;
  std::vector<double> output_times{0.0, 0.25, 0.5, 0.75, 1.0};
  std::uint64_t seed = 1;
  std::string tolerance_profile = "default";  ///< default | strict

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Named presets: equilibrium, decaying, inflow, mms, gravity.
std::vector<std::string> preset_names();
ExperimentConfig preset_config(std::string_view name);

/// Parses JSON (comments allowed). A "preset" key selects the starting values, all other keys
/// override them; unknown keys are rejected. Errors carry line/column or the field path.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Complete configuration as JSON with sorted keys and round-trip number formatting.
std::string canonical_json(const ExperimentConfig& config);

Grid make_grid(const ExperimentConfig& config);
BoundaryData make_boundary(const ExperimentConfig& config, const Grid& grid);
FieldState make_initial(const ExperimentConfig& config, const Grid& grid, const BoundaryData& bd);
/// Time-dependent forcing of the mms preset, null otherwise.
std::shared_ptr<const Forcing> make_forcing(const ExperimentConfig& config);

struct Tolerances {
  double energy = kEnergyTolerance;  ///< per step, relative to max(1, E_0)
  double mass = 1e-10;               ///< per output interval, relative to max(1, mass)
};

Tolerances tolerances(std::string_view profile);

}  // namespace statns
