#include "statns/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <thread>

#include <json.hpp>

#include "statns/error.hpp"

namespace statns {

const char* to_string(EnergyOrder order) {
  switch (order) {
    case EnergyOrder::less_or_equal: return "less_or_equal";
    case EnergyOrder::greater: return "greater";
    case EnergyOrder::incomparable: return "incomparable";
  }
  return "?";
}

namespace {

std::vector<double> union_nodes(std::span<const EnergyTrace* const> traces) {
  std::vector<double> nodes{0.0};
  for (const EnergyTrace* tr : traces) nodes.insert(nodes.end(), tr->times().begin(), tr->times().end());
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  return nodes;
}

struct GapRange {
  double max_diff = -INFINITY;  // max of a - b over one-sided limits
  double min_diff = INFINITY;
};

// a - b is piecewise linear between union nodes, so its one-sided limits there bound it a.e.
GapRange gap_range(const EnergyTrace& a, const EnergyTrace& b) {
  if (a.empty() || b.empty()) throw PreconditionError("energy_order: empty trace");
  const EnergyTrace* both[] = {&a, &b};
  const auto nodes = union_nodes(both);
  GapRange g;
  auto take = [&g](double d) {
    g.max_diff = std::max(g.max_diff, d);
    g.min_diff = std::min(g.min_diff, d);
  };
  for (double t : nodes) {
    if (t > 0.0) take(a.value(t) - b.value(t));
    take(a.right_limit(t) - b.right_limit(t));
  }
  return g;
}

double trajectory_tolerance(const Trajectory& a, const Trajectory& b) {
  return kEnergyTolerance *
         std::max({1.0, a.energy_trace.initial_value(), b.energy_trace.initial_value()});
}

// int_0^h exp(-lambda tau) (1 - tau / h) and (tau / h) dtau.
std::pair<double, double> hat_weights(double lambda, double h) {
  const double x = lambda * h;
  const double full = -std::expm1(-x) / lambda;
  double second;
  if (x < 1e-2) {
    // 1 - e^{-x}(1 + x) = sum_{n>=2} (-1)^n (n - 1) x^n / n!
    double term = x * x / 2.0, sum = 0.0;
    for (int n = 2; n <= 8; ++n) {
      sum += (n % 2 == 0 ? 1.0 : -1.0) * (n - 1) * term;
      term *= x / (n + 1);
    }
    second = sum / (lambda * x);
  } else {
    second = (-std::expm1(-x) - x * std::exp(-x)) / (lambda * x);
  }
  return {full - second, second};
}

}  // namespace

EnergyOrder energy_order(const EnergyTrace& a, const EnergyTrace& b, double tol) {
  const GapRange g = gap_range(a, b);
  if (g.max_diff <= tol) return EnergyOrder::less_or_equal;
  if (g.min_diff >= -tol) return EnergyOrder::greater;
  return EnergyOrder::incomparable;
}

EnergyOrder energy_order(const Trajectory& a, const Trajectory& b) {
  if (a.times != b.times) throw PreconditionError("energy_order: output time grids differ");
  return energy_order(a.energy_trace, b.energy_trace, trajectory_tolerance(a, b));
}

bool strictly_dominates(const EnergyTrace& a, const EnergyTrace& b, double tol) {
  const GapRange g = gap_range(a, b);
  return g.max_diff <= tol && g.min_diff < -tol;
}

void SelectionFunctional::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw PreconditionError("selection functional: lambda must be positive");
  }
  if (!beta) throw PreconditionError("selection functional: beta missing");
  if (!(beta_sup > 0.0) || !std::isfinite(beta_sup)) {
    throw PreconditionError("selection functional: beta must be bounded");
  }
}

KrylovValue krylov_value(const EnergyTrace& trace, const SelectionFunctional& f, double horizon,
                         std::span<const double> nodes) {
  f.validate();
  const double H = horizon > 0.0 ? horizon : f.default_horizon();
  std::vector<double> grid;
  if (nodes.empty()) {
    const EnergyTrace* one[] = {&trace};
    grid = union_nodes(one);
  } else {
    grid.assign(nodes.begin(), nodes.end());
    if (grid.front() != 0.0) grid.insert(grid.begin(), 0.0);
  }
  while (!grid.empty() && grid.back() >= H) grid.pop_back();
  grid.push_back(H);

  KrylovValue out;
  double beta_left = f.beta(trace.right_limit(0.0));
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double t0 = grid[k], t1 = grid[k + 1];
    const double beta_right = f.beta(trace.value(t1));
    const auto [w0, w1] = hat_weights(f.lambda, t1 - t0);
    out.value += std::exp(-f.lambda * t0) * (w0 * beta_left + w1 * beta_right);
    beta_left = f.beta(trace.right_limit(t1));
  }
  out.tail_bound = std::exp(-f.lambda * H) * f.beta_sup / f.lambda;
  return out;
}

KrylovValue krylov_value(const Trajectory& traj, const SelectionFunctional& f, double horizon) {
  return krylov_value(traj.energy_trace, f, horizon);
}

void CandidateFamily::validate() const {
  if (candidates.empty()) throw PreconditionError("candidate family is empty");
  std::set<std::string> ids;
  const Trajectory& ref = candidates.front().trajectory;
  for (const auto& c : candidates) {
    if (!ids.insert(c.id).second) throw PreconditionError("duplicate candidate id " + c.id);
    const Trajectory& tr = c.trajectory;
    if (tr.states.empty() || tr.energy_trace.empty()) {
      throw PreconditionError("candidate " + c.id + " has no data");
    }
    if (!(tr.grid == ref.grid)) throw PreconditionError("candidate " + c.id + ": grid differs");
    if (tr.times != ref.times) throw PreconditionError("candidate " + c.id + ": output times differ");
    if (!(tr.states.front() == ref.states.front())) {
      throw PreconditionError("candidate " + c.id + ": initial state differs");
    }
    const double tol = kEnergyTolerance * std::max(1.0, tr.energy_trace.initial_value());
    for (const auto& s : tr.steps) {
      if (s.energy_residual > tol) {
        throw PreconditionError("candidate " + c.id + " violates the energy inequality at t=" +
                                std::to_string(s.t));
      }
    }
  }
}

SelectionReport select_maximal(const CandidateFamily& family, const SelectionFunctional& f,
                               double horizon) {
  family.validate();
  f.validate();
  const auto& cands = family.candidates;
  const std::size_t n = cands.size();
  std::vector<const EnergyTrace*> traces;
  for (const auto& c : cands) traces.push_back(&c.trajectory.energy_trace);
  const auto nodes = union_nodes(traces);

  SelectionReport rep;
  rep.horizon = horizon > 0.0 ? horizon : f.default_horizon();
  rep.values.assign(n, 0.0);
  {
    std::vector<std::jthread> pool;
    std::vector<KrylovValue> vals(n);
    for (std::size_t i = 0; i < n; ++i) {
      pool.emplace_back([&, i] { vals[i] = krylov_value(*traces[i], f, rep.horizon, nodes); });
    }
    pool.clear();
    for (std::size_t i = 0; i < n; ++i) rep.values[i] = vals[i].value;
    rep.tail_bound = vals.front().tail_bound;
  }
  for (const auto& c : cands) rep.ids.push_back(c.id);

  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (rep.values[i] < rep.values[best] ||
        (rep.values[i] == rep.values[best] && rep.ids[i] < rep.ids[best])) {
      best = i;
    }
  }
  rep.selected = best;

  double e0 = 1.0;
  for (const auto* tr : traces) e0 = std::max(e0, tr->initial_value());
  const double tol = kEnergyTolerance * e0;
  rep.order.assign(n, std::vector<EnergyOrder>(n, EnergyOrder::less_or_equal));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) rep.order[i][j] = energy_order(*traces[i], *traces[j], tol);
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (j != best && strictly_dominates(*traces[j], *traces[best], tol)) rep.audit_passed = false;
  }
  return rep;
}

std::string selection_json(const SelectionReport& report) {
  nlohmann::ordered_json j;
  j["selected"] = report.ids.at(report.selected);
  j["audit_passed"] = report.audit_passed;
  j["horizon"] = report.horizon;
  j["tail_bound"] = report.tail_bound;
  j["candidates"] = report.ids;
  j["values"] = report.values;
  auto order = nlohmann::ordered_json::array();
  for (const auto& row : report.order) {
    auto r = nlohmann::ordered_json::array();
    for (EnergyOrder o : row) r.push_back(to_string(o));
    order.push_back(std::move(r));
  }
  j["order"] = std::move(order);
  return j.dump(2) + "\n";
}

double potential_energy(const FieldState& state, const BoundaryData& bd, const Grid& grid) {
  if (!bd.potential) return 0.0;
  const auto& G = *bd.potential;
  double sum = 0.0;
  for (std::size_t c = 0; c < state.size(); ++c) sum += state.rho[c] * G[c];
  return sum * grid.cell_volume();
}

LyapunovResult lyapunov_limit_check(std::span<const double> times, std::span<const double> trace,
                                    std::span<const double> state_energy,
                                    std::span<const double> potential_energy,
                                    const LyapunovOptions& options) {
  const std::size_t n = times.size();
  if (n < 2 || trace.size() != n || state_energy.size() != n || potential_energy.size() != n) {
    throw PreconditionError("lyapunov check: need at least two samples of equal length");
  }
  std::vector<double> aug(n);
  for (std::size_t k = 0; k < n; ++k) aug[k] = trace[k] - potential_energy[k];

  const std::size_t m = std::min(
      n, std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(options.tail_fraction * n))));
  const std::size_t first = n - m;
  LyapunovResult r;
  r.e_infinity = std::accumulate(aug.begin() + first, aug.end(), 0.0) / static_cast<double>(m);
  const double tol = options.tolerance * std::max(1.0, std::abs(r.e_infinity));

  const auto [lo, hi] = std::minmax_element(aug.begin() + first, aug.end());
  r.tail_spread = *hi - *lo;
  double tm = 0.0;
  for (std::size_t k = first; k < n; ++k) tm += times[k];
  tm /= static_cast<double>(m);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = first; k < n; ++k) {
    sxy += (times[k] - tm) * (aug[k] - r.e_infinity);
    sxx += (times[k] - tm) * (times[k] - tm);
  }
  r.tail_slope = sxx > 0.0 ? sxy / sxx : 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (aug[k + 1] > aug[k] + tol) r.monotone = false;
  }
  r.state_gap = std::abs(state_energy[n - 1] - potential_energy[n - 1] - r.e_infinity);
  r.converged = r.monotone && r.tail_spread <= tol && r.state_gap <= tol;
  return r;
}

LyapunovResult lyapunov_limit_check(const Trajectory& traj, const BoundaryData& bd,
                                    const EosParams& eos, const LyapunovOptions& options) {
  if (!bd.closed()) throw PreconditionError("lyapunov check: requires u_B = 0");
  if (!bd.force_free() && !bd.potential) {
    throw PreconditionError("lyapunov check: requires g = 0 or g = grad G");
  }
  const auto state_e = traj.output_energies(bd, eos);
  std::vector<double> trace(traj.times.size()), pot(traj.times.size());
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    trace[k] = traj.branches[k].empty() ? traj.energy_trace.value(traj.times[k]) : state_e[k];
    pot[k] = potential_energy(traj.states[k], bd, traj.grid);
  }
  return lyapunov_limit_check(traj.times, trace, state_e, pot, options);
}

}  // namespace statns
