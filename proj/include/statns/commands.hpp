#pragma once

#include <filesystem>
#include <iosfwd>

#include "statns/config.hpp"

namespace statns {

enum ExitCode : int { kExitOk = 0, kExitMonitors = 1, kExitUsage = 2, kExitRuntime = 3 };

struct CommandOptions {
  unsigned workers = 0;
  std::ostream* log = nullptr;  ///< progress and summary lines; null silences them
};

/// Each command writes an archive under `out` and returns kExitOk or kExitMonitors. Config and
/// precondition problems throw ConfigError / PreconditionError, solver failures SolverError.

/// Trajectory archive: snapshots/state_NNNN.bin, energy_trace.csv, residuals.csv and, for the
/// mms boundary, convergence.csv over mms.resolutions.
int cmd_simulate(const ExperimentConfig& config, const std::filesystem::path& out,
                 const CommandOptions& options = {});

/// Ensemble archive: ensemble.json, atoms/atom_NNNN/state_NNNN.bin, expectations.csv.
int cmd_ensemble(const ExperimentConfig& config, const std::filesystem::path& out,
                 const CommandOptions& options = {});

/// W_E between two ensemble archives at distance.time: distance.json and plan.csv.
int cmd_distance(const ExperimentConfig& config, const std::filesystem::path& archive_a,
                 const std::filesystem::path& archive_b, const std::filesystem::path& out,
                 const CommandOptions& options = {});

/// continuity.csv and continuity.json; exit 1 when the run is invalid or e_n is not monotone.
int cmd_continuity(const ExperimentConfig& config, const std::filesystem::path& out,
                   const CommandOptions& options = {});

/// Candidate family over selection.dissipation_levels, one selection per lambda:
/// selection.json and energy_traces.csv.
int cmd_select(const ExperimentConfig& config, const std::filesystem::path& out,
               const CommandOptions& options = {});

/// Full command line: statns <subcommand> [--config PATH | --preset NAME] [--out DIR]
/// [--workers N] [--seed S] [--tolerance-profile strict|default] [archives...].
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace statns
