#include "statns/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "statns/archive.hpp"
#include "statns/error.hpp"
#include "statns/measures.hpp"
#include "statns/mms.hpp"
#include "statns/selection.hpp"
#include "statns/transport.hpp"
#include "statns/verify.hpp"

namespace statns {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string indexed(const char* prefix, std::size_t k, const char* suffix) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%04zu%s", prefix, k, suffix);
  return buf;
}

void say(const CommandOptions& o, const std::string& line) {
  if (o.log) *o.log << line << "\n";
}

std::string trace_csv(const EnergyTrace& tr) {
  std::string s = "t,left,right\n";
  for (std::size_t k = 0; k < tr.times().size(); ++k) {
    s += fmt17(tr.times()[k]) + "," + fmt17(tr.left()[k]) + "," + fmt17(tr.right()[k]) + "\n";
  }
  return s;
}

double max_step_residual(const Trajectory& tr) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& s : tr.steps) worst = std::max(worst, s.energy_residual);
  for (const auto& b : tr.branches) {
    for (const auto& s : b) worst = std::max(worst, s.energy_residual);
  }
  return tr.steps.empty() ? 0.0 : worst;
}

double sup_mms_error(const Trajectory& tr, const MmsProblem& p) {
  double e = 0.0;
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    e = std::max(e, p.l1_error(tr.states[k], tr.grid, tr.times[k]));
  }
  return e;
}

Ensemble build_ensemble(const ExperimentConfig& c, const Grid& grid, const BoundaryData& bd) {
  if (c.ensemble.kind == "dirac") {
    return dirac(grid, make_data_point(grid, make_initial(c, grid, bd), bd, c.solver.eos));
  }
  FourierSampler s;
  s.rho_mean = c.initial.rho_mean;
  s.rho_amplitude = c.ensemble.rho_amplitude;
  s.mom_amplitude = c.ensemble.mom_amplitude;
  s.modes = c.ensemble.modes;
  s.seed = c.seed;
  return sample_fourier(grid, bd, s, c.ensemble.atoms, c.solver.eos);
}

struct LoadedEnsemble {
  ExperimentConfig config;
  Ensemble ensemble;
};

LoadedEnsemble load_ensemble(const fs::path& dir, double t) {
  const auto check = check_archive(dir);
  if (!check.ok) {
    throw PreconditionError("archive " + dir.string() + " is damaged: " + check.problems.front());
  }
  LoadedEnsemble out;
  out.config = parse_config(read_file(dir / "config.json"));
  const json meta = json::parse(read_file(dir / "ensemble.json"));
  const auto times = meta["output_times"].get<std::vector<double>>();
  auto it = std::find(times.begin(), times.end(), t);
  if (it == times.end()) {
    throw ConfigError("distance.time: " + fmt17(t) + " is not an output time of " + dir.string());
  }
  const std::size_t slot = static_cast<std::size_t>(it - times.begin());
  const Grid grid = make_grid(out.config);
  const BoundaryData bd = make_boundary(out.config, grid);
  out.ensemble.grid = grid;
  out.ensemble.weights = meta["weights"].get<std::vector<double>>();
  for (std::size_t k = 0; k < out.ensemble.weights.size(); ++k) {
    const Snapshot snap =
        read_snapshot(dir / "atoms" / indexed("atom_", k, "") / indexed("state_", slot, ".bin"));
    if (!(snap.grid == grid)) throw PreconditionError("snapshot grid differs from the config grid");
    DataPoint p{snap.state, bd, 0.0};
    p.energy = total_energy(snap.state, bd, grid, out.config.solver.eos)
                   .value_or(std::numeric_limits<double>::infinity());
    out.ensemble.atoms.push_back(std::move(p));
  }
  out.ensemble.validate();
  return out;
}

}  // namespace

int cmd_simulate(const ExperimentConfig& config, const fs::path& out, const CommandOptions& options) {
  config.validate();
  const Tolerances tol = tolerances(config.tolerance_profile);
  const Grid grid = make_grid(config);
  const BoundaryData bd = make_boundary(config, grid);
  const FieldState init = make_initial(config, grid, bd);
  IntegrateOptions io;
  io.forcing = make_forcing(config);
  const Trajectory tr = integrate(grid, init, bd, config.solver, config.output_times, io);

  ArchiveWriter ar(out);
  for (std::size_t k = 0; k < tr.states.size(); ++k) {
    ar.add(indexed("snapshots/state_", k, ".bin"), encode_snapshot(grid, tr.times[k], tr.states[k]));
  }
  ar.add("energy_trace.csv", trace_csv(tr.energy_trace));
  const auto er = energy_inequality_residual(tr, bd, config.solver);
  const auto mr = mass_balance_residual(tr, bd);
  std::string res = "interval,t_begin,t_end,energy_residual,mass_residual\n";
  double worst_mass = 0.0;
  for (std::size_t k = 0; k < er.size(); ++k) {
    res += std::to_string(k) + "," + fmt17(tr.times[k]) + "," + fmt17(tr.times[k + 1]) + "," +
           fmt17(er[k]) + "," + fmt17(mr[k]) + "\n";
    worst_mass = std::max(worst_mass, std::abs(mr[k]));
  }
  ar.add("residuals.csv", res);

  const double e0 = tr.energy_trace.initial_value();
  const double m0 = total_mass(init, grid);
  const double step_r = max_step_residual(tr);
  const double e_tol = tol.energy * std::max(1.0, e0);
  const double m_tol = tol.mass * std::max(1.0, m0);
  json status;
  status["dt"] = tr.dt;
  status["steps"] = tr.steps.size();
  status["initial_energy"] = e0;
  status["max_step_energy_residual"] = step_r;
  status["energy_tolerance"] = e_tol;
  status["max_mass_residual"] = worst_mass;
  status["mass_tolerance"] = m_tol;
  bool ok = step_r <= e_tol && worst_mass <= m_tol;

  if (config.boundary.kind == "mms") {
    MmsProblem p;
    p.eos = config.solver.eos;
    std::string csv = "cells,sup_l1_error,ratio\n";
    double prev = 0.0, worst_ratio = std::numeric_limits<double>::infinity();
    for (int n : config.mms.resolutions) {
      ExperimentConfig c = config;
      c.grid.cells = {n, 1};
      const Grid g = make_grid(c);
      const Trajectory t = integrate(g, p.exact(g, 0.0), p.boundary(g), c.solver,
                                     config.output_times, io);
      const double e = sup_mms_error(t, p);
      const double ratio = prev > 0.0 ? prev / e : 0.0;
      if (prev > 0.0) worst_ratio = std::min(worst_ratio, ratio);
      csv += std::to_string(n) + "," + fmt17(e) + "," + fmt17(ratio) + "\n";
      prev = e;
    }
    ar.add("convergence.csv", csv);
    if (std::isfinite(worst_ratio)) {
      status["min_refinement_ratio"] = worst_ratio;
      ok = ok && worst_ratio >= 1.7;
    }
  }
  status["pass"] = ok;
  const int code = ok ? kExitOk : kExitMonitors;
  ar.finish("simulate", canonical_json(config), code, status.dump());
  say(options, "simulate: " + std::to_string(tr.steps.size()) + " steps, max step residual " +
                   fmt17(step_r) + ", max mass residual " + fmt17(worst_mass) +
                   (ok ? ", monitors pass" : ", MONITORS FAILED"));
  return code;
}

int cmd_ensemble(const ExperimentConfig& config, const fs::path& out, const CommandOptions& options) {
  config.validate();
  const Tolerances tol = tolerances(config.tolerance_profile);
  const Grid grid = make_grid(config);
  const BoundaryData bd = make_boundary(config, grid);
  const Ensemble ens = build_ensemble(config, grid, bd);
  PropagateOptions po;
  po.workers = options.workers;
  po.forcing = make_forcing(config);
  const auto trajs = propagate(ens, config.output_times, config.solver, po);

  ArchiveWriter ar(out);
  const std::size_t nt = config.output_times.size();
  std::vector<double> mean_e(nt, 0.0), mean_m(nt, 0.0);
  bool ok = true;
  double worst_step = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < ens.size(); ++a) {
    const Trajectory& tr = trajs[a];
    const std::string dir = "atoms/" + indexed("atom_", a, "") + "/";
    for (std::size_t k = 0; k < nt; ++k) {
      ar.add(dir + indexed("state_", k, ".bin"), encode_snapshot(grid, tr.times[k], tr.states[k]));
      mean_e[k] += ens.weights[a] * output_energy(tr, k, bd, config.solver.eos);
      mean_m[k] += ens.weights[a] * total_mass(tr.states[k], grid);
    }
    const double r = max_step_residual(tr);
    worst_step = std::max(worst_step, r);
    if (r > tol.energy * std::max(1.0, tr.energy_trace.initial_value())) ok = false;
  }
  std::string csv = "t,energy,mass\n";
  bool nonincreasing = true;
  for (std::size_t k = 0; k < nt; ++k) {
    csv += fmt17(config.output_times[k]) + "," + fmt17(mean_e[k]) + "," + fmt17(mean_m[k]) + "\n";
    if (k > 0 && mean_e[k] > mean_e[k - 1] + tol.energy * std::max(1.0, mean_e[0])) {
      nonincreasing = false;
    }
  }
  ar.add("expectations.csv", csv);
  json meta;
  meta["atoms"] = ens.size();
  meta["sampler"] = config.ensemble.kind == "dirac" ? "dirac" : FourierSampler::id;
  meta["seed"] = config.seed;
  meta["weights"] = ens.weights;
  meta["output_times"] = config.output_times;
  std::vector<double> e0;
  for (const auto& p : ens.atoms) e0.push_back(p.energy);
  meta["initial_energies"] = e0;
  ar.add("ensemble.json", meta.dump(2) + "\n");

  const bool lyapunov = bd.closed() && bd.force_free();
  if (lyapunov) ok = ok && nonincreasing;
  json status;
  status["max_step_energy_residual"] = worst_step;
  status["expected_energy_nonincreasing"] = nonincreasing;
  status["pass"] = ok;
  const int code = ok ? kExitOk : kExitMonitors;
  ar.finish("ensemble", canonical_json(config), code, status.dump());
  say(options, "ensemble: " + std::to_string(ens.size()) + " atoms, max step residual " +
                   fmt17(worst_step) + (ok ? ", monitors pass" : ", MONITORS FAILED"));
  return code;
}

int cmd_distance(const ExperimentConfig& config, const fs::path& archive_a, const fs::path& archive_b,
                 const fs::path& out, const CommandOptions& options) {
  config.validate();
  const LoadedEnsemble a = load_ensemble(archive_a, config.distance.time);
  const LoadedEnsemble b = load_ensemble(archive_b, config.distance.time);
  if (!(a.ensemble.grid == b.ensemble.grid)) {
    throw PreconditionError("distance: the ensembles live on different grids");
  }
  if (!(a.ensemble.atoms.front().bd == b.ensemble.atoms.front().bd)) {
    throw PreconditionError(
        "distance: boundary data differ (" + a.config.boundary.kind + " vs " +
        b.config.boundary.kind + "); W_E is only compared for equal boundary data");
  }
  const EosParams& eos = config.solver.eos;
  const CostMatrix cost = build_cost_matrix(a.ensemble, b.ensemble, eos, options.workers);
  json rep;
  rep["method"] = config.distance.method;
  rep["time"] = config.distance.time;
  rep["rows"] = cost.rows;
  rep["cols"] = cost.cols;
  TransportPlan plan;
  bool ok = true;
  if (config.distance.method == "exact") {
    const TransportResult r = we_distance_exact(a.ensemble, b.ensemble, cost);
    const CostMatrix back = build_cost_matrix(b.ensemble, a.ensemble, eos, options.workers);
    const TransportResult rb = we_distance_exact(b.ensemble, a.ensemble, back);
    rep["value"] = r.finite ? json(r.value) : json("inf");
    rep["reverse_value"] = rb.finite ? json(rb.value) : json("inf");
    rep["marginal_violation"] = r.plan.marginal_violation(a.ensemble.weights, b.ensemble.weights);
    plan = r.plan;
  } else {
    const EntropicResult r =
        we_distance_entropic(a.ensemble.weights, b.ensemble.weights, cost, config.distance.epsilon);
    rep["value"] = r.value;
    rep["epsilon"] = config.distance.epsilon;
    rep["iterations"] = r.iterations;
    rep["converged"] = r.converged;
    rep["marginal_violation"] = r.marginal_violation;
    rep["entropy_bound"] = r.entropy_bound;
    ok = r.converged;
    plan = r.plan;
  }
  ArchiveWriter ar(out);
  ar.add("distance.json", rep.dump(2) + "\n");
  std::string csv = "i,j,mass,cost\n";
  for (std::size_t i = 0; i < plan.rows; ++i) {
    for (std::size_t j = 0; j < plan.cols; ++j) {
      if (plan.at(i, j) > 0.0) {
        csv += std::to_string(i) + "," + std::to_string(j) + "," + fmt17(plan.at(i, j)) + "," +
               fmt17(cost.at(i, j)) + "\n";
      }
    }
  }
  ar.add("plan.csv", csv);
  const int code = ok ? kExitOk : kExitMonitors;
  json status{{"pass", ok}};
  ar.finish("distance", canonical_json(config), code, status.dump());
  say(options, "distance: W_E = " + rep["value"].dump());
  return code;
}

int cmd_continuity(const ExperimentConfig& config, const fs::path& out,
                   const CommandOptions& options) {
  config.validate();
  const Grid grid = make_grid(config);
  const BoundaryData bd = make_boundary(config, grid);
  const Ensemble nu = build_ensemble(config, grid, bd);
  ContinuityConfig cc;
  if (config.continuity.deltas.empty()) {
    for (int n = 1; n <= config.continuity.n_max; ++n) cc.deltas.push_back(std::ldexp(1.0, -n));
  } else {
    cc.deltas = config.continuity.deltas;
  }
  cc.horizon = config.continuity.horizon;
  for (int k = 0; k <= config.continuity.outputs; ++k) {
    cc.output_times.push_back(cc.horizon * k / config.continuity.outputs);
  }
  cc.band = config.continuity.band;
  cc.modes = config.continuity.modes;
  cc.seed = config.seed;
  cc.workers = options.workers;
  const ContinuityReport rep = continuity_experiment(nu, cc, config.solver);

  ArchiveWriter ar(out);
  ar.add("continuity.csv", continuity_csv(rep));
  ar.add("continuity.json", continuity_json(rep, cc));
  const bool ok = rep.valid && rep.monotone;
  json status{{"valid", rep.valid}, {"monotone", rep.monotone}, {"pass", ok}};
  if (!rep.valid) status["diagnostic"] = rep.diagnostic;
  const int code = ok ? kExitOk : kExitMonitors;
  ar.finish("continuity", canonical_json(config), code, status.dump());
  say(options, rep.valid ? "continuity: max ratio " + fmt17(rep.max_ratio) + ", log-ratio slope " +
                               fmt17(rep.log_ratio_slope) +
                               (rep.monotone ? ", monotone" : ", NOT monotone")
                         : "continuity: INVALID experiment: " + rep.diagnostic);
  return code;
}

int cmd_select(const ExperimentConfig& config, const fs::path& out, const CommandOptions& options) {
  config.validate();
  const Grid grid = make_grid(config);
  const BoundaryData bd = make_boundary(config, grid);
  const FieldState init = make_initial(config, grid, bd);
  IntegrateOptions io;
  io.forcing = make_forcing(config);

  // One macro step for all candidates, resolved at the strongest dissipation level.
  SolverConfig base = config.solver;
  base.artificial_dissipation = *std::max_element(config.selection.dissipation_levels.begin(),
                                                  config.selection.dissipation_levels.end());
  const double dt = resolve_dt(grid, init, bd, base, config.output_times);

  CandidateFamily fam;
  fam.bd = bd;
  for (double level : config.selection.dissipation_levels) {
    SolverConfig c = config.solver;
    c.artificial_dissipation = level;
    c.dt = dt;
    char id[64];
    std::snprintf(id, sizeof id, "dissipation=%g", level);
    fam.candidates.push_back(
        {id, "artificial_dissipation", integrate(grid, init, bd, c, config.output_times, io)});
  }

  json rep;
  rep["reports"] = json::array();
  bool ok = true;
  std::size_t last_selected = 0;
  for (double lambda : config.selection.lambdas) {
    SelectionFunctional f;
    f.lambda = lambda;
    const SelectionReport r = select_maximal(fam, f, config.selection.horizon);
    json j = json::parse(selection_json(r));
    j["lambda"] = lambda;
    rep["reports"].push_back(std::move(j));
    ok = ok && r.audit_passed;
    last_selected = r.selected;
  }
  if (bd.closed() && (bd.force_free() || bd.potential)) {
    const LyapunovResult ly =
        lyapunov_limit_check(fam.candidates[last_selected].trajectory, bd, config.solver.eos);
    rep["lyapunov"] = {{"e_infinity", ly.e_infinity},   {"converged", ly.converged},
                       {"tail_spread", ly.tail_spread}, {"tail_slope", ly.tail_slope},
                       {"state_gap", ly.state_gap},     {"monotone", ly.monotone}};
  }
  ArchiveWriter ar(out);
  ar.add("selection.json", rep.dump(2) + "\n");
  std::string csv = "candidate,t,left,right\n";
  for (const auto& c : fam.candidates) {
    const auto& tr = c.trajectory.energy_trace;
    for (std::size_t k = 0; k < tr.times().size(); ++k) {
      csv += c.id + "," + fmt17(tr.times()[k]) + "," + fmt17(tr.left()[k]) + "," +
             fmt17(tr.right()[k]) + "\n";
    }
  }
  ar.add("energy_traces.csv", csv);
  const int code = ok ? kExitOk : kExitMonitors;
  ar.finish("select", canonical_json(config), code, json{{"pass", ok}}.dump());
  say(options, "select: " + fam.candidates[last_selected].id +
                   (ok ? ", audit passed" : ", AUDIT FAILED"));
  return code;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Statistical solutions of the barotropic Navier-Stokes system", "statns"};
  app.require_subcommand(1);
  std::string config_path, preset, out_dir = "out", profile;
  unsigned workers = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> archives;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", config_path, "experiment config (JSON, comments allowed)");
    auto* p = sub->add_option("--preset", preset, "start from a named preset");
    if (needs_config) {
      c->excludes(p);
      p->excludes(c);
    }
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--workers", workers, "worker threads (0 = all cores)");
    sub->add_option("--seed", seed, "overrides the config seed");
    sub->add_option("--tolerance-profile", profile, "strict or default")
        ->check(CLI::IsMember({"strict", "default"}));
  };
  auto* sim = app.add_subcommand("simulate", "integrate one trajectory");
  auto* ens = app.add_subcommand("ensemble", "sample and propagate an ensemble");
  auto* dist = app.add_subcommand("distance", "W_E between two ensemble archives");
  auto* cont = app.add_subcommand("continuity", "continuity experiment at regular data");
  auto* sel = app.add_subcommand("select", "maximal-dissipation selection");
  auto* ver = app.add_subcommand("verify", "run the acceptance suite");
  for (auto* s : {sim, ens, dist, cont, sel}) add_common(s, true);
  add_common(ver, false);
  dist->add_option("archives", archives, "two ensemble archive directories")
      ->required()
      ->expected(2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  CommandOptions opt;
  opt.workers = workers;
  opt.log = &out;
  try {
    if (ver->parsed()) {
      VerifyOptions vo;
      vo.workers = workers;
      vo.scratch = fs::path(out_dir) / "scratch";
      vo.log = &out;
      const auto results = run_acceptance(vo);
      std::string csv = "criterion,passed,seconds,detail\n";
      bool all = true;
      for (const auto& r : results) {
        all = all && r.passed;
        std::string detail = r.detail;
        std::replace(detail.begin(), detail.end(), ',', ';');
        csv += std::to_string(r.id) + "," + (r.passed ? "1" : "0") + "," + fmt17(r.seconds) + "," +
               detail + "\n";
      }
      ArchiveWriter ar(out_dir);
      ar.add("verify.csv", csv);
      ar.finish("verify", "{}\n", all ? kExitOk : kExitMonitors);
      return all ? kExitOk : kExitMonitors;
    }
    ExperimentConfig config;
    if (!config_path.empty()) {
      config = load_config(config_path);
    } else if (!preset.empty()) {
      config = preset_config(preset);
    } else {
      err << "error: --config or --preset is required\n";
      return kExitUsage;
    }
    for (auto* sub : app.get_subcommands()) {
      if (sub->count("--seed") > 0) config.seed = seed;
    }
    if (!profile.empty()) config.tolerance_profile = profile;
    config.validate();
    if (sim->parsed()) return cmd_simulate(config, out_dir, opt);
    if (ens->parsed()) return cmd_ensemble(config, out_dir, opt);
    if (dist->parsed()) return cmd_distance(config, archives[0], archives[1], out_dir, opt);
    if (cont->parsed()) return cmd_continuity(config, out_dir, opt);
    if (sel->parsed()) return cmd_select(config, out_dir, opt);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const PreconditionError& e) {
    err << "precondition violated: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const SolverError& e) {
    err << "solver failure: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "runtime failure: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace statns
