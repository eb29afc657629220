#include "statns/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <type_traits>

#include "statns/error.hpp"

namespace statns {

namespace {

constexpr double kVacuumVelocity = 1e-10;

using Mat2 = std::array<Vec2, 2>;  // m[a][b]

// Velocity with the Dirichlet ghost extension u_ghost = 2 u_B - u_mirror.
class GhostVelocity {
 public:
  GhostVelocity(const Grid& grid, const std::vector<Vec2>& u, const BoundaryData& bd)
      : grid_(grid), u_(u), bd_(bd) {}

  bool is_ghost(int i, int j) const {
    return i < 0 || i >= grid_.nx() || (grid_.dim == 2 && (j < 0 || j >= grid_.ny()));
  }

  std::size_t mirror(int i, int j) const {
    return grid_.index(std::clamp(i, 0, grid_.nx() - 1),
                       grid_.dim == 2 ? std::clamp(j, 0, grid_.ny() - 1) : 0);
  }

  Vec2 boundary_velocity(int i, int j) const {
    const int nx = grid_.nx(), ny = grid_.ny();
    const bool xout = i < 0 || i >= nx;
    const bool yout = grid_.dim == 2 && (j < 0 || j >= ny);
    if (xout && yout) {
      const int corner = (i < 0 ? 0 : 1) + (j < 0 ? 0 : 2);
      return bd_.u_corner[corner];
    }
    if (xout) return bd_.u_face[(i < 0 ? 0 : ny) + (grid_.dim == 2 ? j : 0)];
    return bd_.u_face[2 * ny + (j < 0 ? 0 : nx) + i];
  }

  Vec2 operator()(int i, int j) const {
    if (!is_ghost(i, j)) return u_[grid_.index(i, j)];
    const Vec2 ub = boundary_velocity(i, j);
    const Vec2 um = u_[mirror(i, j)];
    return {2.0 * ub[0] - um[0], 2.0 * ub[1] - um[1]};
  }

 private:
  const Grid& grid_;
  const std::vector<Vec2>& u_;
  const BoundaryData& bd_;
};

// S(G) for G[a][b] = d_b u_a in `dim` dimensions.
Mat2 viscous_stress(const Mat2& g, int dim, const SolverConfig& cfg) {
  Mat2 s{Vec2{0.0, 0.0}, Vec2{0.0, 0.0}};
  if (dim == 1) {
    // The traceless shear part vanishes identically in one dimension.
    s[0][0] = cfg.lambda * g[0][0];
    return s;
  }
  const double div = g[0][0] + g[1][1];
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      s[a][b] = cfg.mu * (g[a][b] + g[b][a]);
    }
    s[a][a] += (cfg.lambda - cfg.mu) * div;  // -(2/d) mu div with d = 2
  }
  return s;
}

double contract(const Mat2& a, const Mat2& b) {
  return a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1];
}

// Cell-centred velocity gradient by centred differences with ghosts.
Mat2 cell_gradient(const GhostVelocity& gu, const Grid& grid, int i, int j) {
  Mat2 g{Vec2{0.0, 0.0}, Vec2{0.0, 0.0}};
  const Vec2 xp = gu(i + 1, j), xm = gu(i - 1, j);
  for (int a = 0; a < grid.dim; ++a) g[a][0] = (xp[a] - xm[a]) / (2.0 * grid.spacing[0]);
  if (grid.dim == 2) {
    const Vec2 yp = gu(i, j + 1), ym = gu(i, j - 1);
    for (int a = 0; a < 2; ++a) g[a][1] = (yp[a] - ym[a]) / (2.0 * grid.spacing[1]);
  }
  return g;
}

void check_finite(const FieldState& s, const char* where) {
  for (std::size_t c = 0; c < s.size(); ++c) {
    if (!std::isfinite(s.rho[c]) || !std::isfinite(s.mom[c][0]) || !std::isfinite(s.mom[c][1])) {
      std::ostringstream msg;
      msg << where << ": non-finite value in cell " << c;
      throw SolverError(msg.str());
    }
  }
}

std::optional<std::size_t> first_negative(const FieldState& s) {
  for (std::size_t c = 0; c < s.size(); ++c) {
    if (s.rho[c] < 0.0) return c;
  }
  return std::nullopt;
}

double energy_or_inf(const FieldState& s, const BoundaryData& bd, const Grid& grid,
                     const EosParams& eos) {
  return total_energy(s, bd, grid, eos).value_or(std::numeric_limits<double>::infinity());
}

}  // namespace

void SolverConfig::validate() const {
  eos.validate();
  if (!(mu > 0.0)) throw PreconditionError("solver config: mu must be positive");
  if (!(lambda >= 0.0)) throw PreconditionError("solver config: lambda must be nonnegative");
  if (!(cfl > 0.0 && cfl < 1.0)) throw PreconditionError("solver config: cfl must lie in (0,1)");
  if (!(t_end >= 0.0)) throw PreconditionError("solver config: t_end must be nonnegative");
  if (!(artificial_dissipation >= 0.0)) {
    throw PreconditionError("solver config: artificial_dissipation must be nonnegative");
  }
  if (!(dt >= 0.0)) throw PreconditionError("solver config: dt must be nonnegative");
}

std::vector<Vec2> velocity_field(const FieldState& state, const BoundaryData& bd) {
  std::vector<Vec2> u(state.size());
  for (std::size_t c = 0; c < state.size(); ++c) {
    const double rho = state.rho[c];
    if (rho < kVacuumVelocity) {
      u[c] = bd.u_cell[c];
    } else {
      u[c] = {state.mom[c][0] / rho, state.mom[c][1] / rho};
    }
  }
  return u;
}

RhsTerms evaluate_rhs(const Grid& grid, const FieldState& state, const BoundaryData& bd,
                      const SolverConfig& cfg, double t, const Forcing* forcing) {
  const std::size_t n = grid.cell_count();
  const int nx = grid.nx(), ny = grid.ny(), dim = grid.dim;
  const double vol = grid.cell_volume();
  const EosParams& eos = cfg.eos;
  RhsTerms out;
  out.drho.assign(n, 0.0);
  out.dmom.assign(n, Vec2{0.0, 0.0});

  const auto u = velocity_field(state, bd);
  std::vector<double> p(n), cs(n);
  for (std::size_t c = 0; c < n; ++c) {
    p[c] = pressure(state.rho[c], eos);
    cs[c] = sound_speed(state.rho[c], eos);
  }

  // Interior Rusanov fluxes.
  auto rusanov = [&](std::size_t l, std::size_t r, int axis) {
    const double unl = u[l][axis], unr = u[r][axis];
    const double alpha =
        cfg.artificial_dissipation * std::max(std::abs(unl) + cs[l], std::abs(unr) + cs[r]);
    const double fl_rho = state.mom[l][axis], fr_rho = state.mom[r][axis];
    const double f_rho = 0.5 * (fl_rho + fr_rho) - 0.5 * alpha * (state.rho[r] - state.rho[l]);
    Vec2 f_mom;
    for (int a = 0; a < 2; ++a) {
      const double fl = state.mom[l][a] * unl + (a == axis ? p[l] : 0.0);
      const double fr = state.mom[r][a] * unr + (a == axis ? p[r] : 0.0);
      f_mom[a] = 0.5 * (fl + fr) - 0.5 * alpha * (state.mom[r][a] - state.mom[l][a]);
    }
    const double inv_h = 1.0 / grid.spacing[axis];
    out.drho[l] -= f_rho * inv_h;
    out.drho[r] += f_rho * inv_h;
    for (int a = 0; a < 2; ++a) {
      out.dmom[l][a] -= f_mom[a] * inv_h;
      out.dmom[r][a] += f_mom[a] * inv_h;
    }
  };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) rusanov(grid.index(i, j), grid.index(i + 1, j), 0);
  }
  if (dim == 2) {
    for (int j = 0; j + 1 < ny; ++j) {
      for (int i = 0; i < nx; ++i) rusanov(grid.index(i, j), grid.index(i, j + 1), 1);
    }
  }

  // Boundary fluxes: trace rho = rho_B on inflow, upwind interior rho on outflow.
  const auto faces = boundary_faces(grid);
  const auto part = classify_boundary(bd, grid);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& face = faces[f];
    const std::size_t c = face.cell;
    const Vec2 ub = bd.u_face[f];
    const double un = dot(ub, face.normal);
    double rho_f = 0.0;
    double flux_rho = 0.0;
    switch (part.kind[f]) {
      case FaceKind::inflow:
        rho_f = bd.rho_face[f];
        if (forcing && forcing->inflow_density) rho_f = forcing->inflow_density(t, face.center);
        flux_rho = rho_f * un;
        out.boundary_in += pressure_potential(rho_f, eos) * un * face.area;
        break;
      case FaceKind::outflow:
        rho_f = state.rho[c];
        flux_rho = rho_f * un;
        out.boundary_out += pressure_potential(rho_f, eos) * un * face.area;
        break;
      case FaceKind::characteristic:
        break;
    }
    const double inv_h = face.area / vol;
    out.drho[c] -= flux_rho * inv_h;
    out.mass_outflux += flux_rho * face.area;
    for (int a = 0; a < 2; ++a) {
      const double flux = flux_rho * ub[a] + p[c] * face.normal[a];
      out.dmom[c][a] -= flux * inv_h;
    }
  }

  // Viscous stress on vertices; the cell force is minus the adjoint of the vertex gradient, so
  // that sum_c |cell| u_c . f_c = -sum_v W_v S_v : G_v whenever u_B = 0.
  GhostVelocity gu(grid, u, bd);
  std::vector<Vec2> force(n, Vec2{0.0, 0.0});
  auto deposit = [&](int i, int j, const Mat2& s, double w, double cx, double cy) {
    double sign = 1.0;
    std::size_t c;
    if (gu.is_ghost(i, j)) {
      sign = -1.0;
      c = gu.mirror(i, j);
    } else {
      c = grid.index(i, j);
    }
    for (int a = 0; a < 2; ++a) force[c][a] -= sign * w * (s[a][0] * cx + s[a][1] * cy);
  };
  const double hx = grid.spacing[0], hy = grid.spacing[1];
  if (dim == 1) {
    for (int v = 0; v <= nx; ++v) {
      const Vec2 ul = gu(v - 1, 0), ur = gu(v, 0);
      Mat2 g{Vec2{(ur[0] - ul[0]) / hx, 0.0}, Vec2{0.0, 0.0}};
      const Mat2 s = viscous_stress(g, 1, cfg);
      const double w = vol * ((v == 0 || v == nx) ? 0.5 : 1.0);
      out.dissipation += w * contract(s, g);
      deposit(v, 0, s, w, 1.0 / hx, 0.0);
      deposit(v - 1, 0, s, w, -1.0 / hx, 0.0);
    }
  } else {
    for (int jv = 0; jv <= ny; ++jv) {
      for (int iv = 0; iv <= nx; ++iv) {
        const Vec2 u00 = gu(iv - 1, jv - 1), u10 = gu(iv, jv - 1);
        const Vec2 u01 = gu(iv - 1, jv), u11 = gu(iv, jv);
        Mat2 g;
        for (int a = 0; a < 2; ++a) {
          g[a][0] = ((u11[a] - u01[a]) + (u10[a] - u00[a])) / (2.0 * hx);
          g[a][1] = ((u11[a] - u10[a]) + (u01[a] - u00[a])) / (2.0 * hy);
        }
        const Mat2 s = viscous_stress(g, 2, cfg);
        double w = vol;
        if (iv == 0 || iv == nx) w *= 0.5;
        if (jv == 0 || jv == ny) w *= 0.5;
        out.dissipation += w * contract(s, g);
        const double cx = 1.0 / (2.0 * hx), cy = 1.0 / (2.0 * hy);
        deposit(iv, jv, s, w, cx, cy);
        deposit(iv - 1, jv, s, w, -cx, cy);
        deposit(iv, jv - 1, s, w, cx, -cy);
        deposit(iv - 1, jv - 1, s, w, -cx, -cy);
      }
    }
  }
  for (std::size_t c = 0; c < n; ++c) {
    out.dmom[c][0] += force[c][0] / vol;
    out.dmom[c][1] += force[c][1] / vol;
  }

  // Body force and the energy source terms.
  bool lifted_gradient = false;
  for (std::size_t c = 0; c < n && !lifted_gradient; ++c) {
    lifted_gradient = norm2(bd.grad_u_cell_x[c]) > 0.0 || norm2(bd.grad_u_cell_y[c]) > 0.0;
  }
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t c = grid.index(i, j);
      Vec2 g = bd.g[c];
      if (forcing && forcing->force) {
        g = forcing->force(t, grid.cell_center(c));
        if (dim == 1) g[1] = 0.0;
      }
      const double rho = state.rho[c];
      out.dmom[c][0] += rho * g[0];
      out.dmom[c][1] += rho * g[1];
      const Vec2 ub = bd.u_cell[c];
      double src = rho * dot(g, Vec2{u[c][0] - ub[0], u[c][1] - ub[1]});
      if (lifted_gradient) {
        // grad u_B as G[a][b] = d_b u_B,a.
        const Mat2 gb{Vec2{bd.grad_u_cell_x[c][0], bd.grad_u_cell_y[c][0]},
                      Vec2{bd.grad_u_cell_x[c][1], bd.grad_u_cell_y[c][1]}};
        Mat2 flux{Vec2{rho * u[c][0] * u[c][0] + p[c], rho * u[c][0] * u[c][1]},
                  Vec2{rho * u[c][1] * u[c][0], rho * u[c][1] * u[c][1] + p[c]}};
        src -= contract(flux, gb);
        // rho u . grad(|u_B|^2 / 2)
        for (int a = 0; a < 2; ++a) {
          for (int b = 0; b < 2; ++b) src += rho * u[c][b] * ub[a] * gb[a][b];
        }
        const Mat2 s = viscous_stress(cell_gradient(gu, grid, i, j), dim, cfg);
        src += contract(s, gb);
      }
      out.source += src * vol;
    }
  }
  return out;
}

double stable_dt(const Grid& grid, const FieldState& state, const BoundaryData& bd,
                 const SolverConfig& cfg) {
  const auto u = velocity_field(state, bd);
  const double k = std::max(1.0, cfg.artificial_dissipation);
  double inv = 0.0;
  double rho_min = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < state.size(); ++c) {
    const double cs = sound_speed(state.rho[c], cfg.eos);
    double s = k * (std::abs(u[c][0]) + cs) / grid.spacing[0];
    if (grid.dim == 2) s += k * (std::abs(u[c][1]) + cs) / grid.spacing[1];
    inv = std::max(inv, s);
    rho_min = std::min(rho_min, std::max(state.rho[c], kVacuumVelocity));
  }
  double dt = inv > 0.0 ? 1.0 / inv : std::numeric_limits<double>::infinity();
  const double visc = grid.dim == 1 ? cfg.lambda : 2.0 * cfg.mu + cfg.lambda;
  if (visc > 0.0) {
    const double h = grid.min_spacing();
    dt = std::min(dt, h * h * rho_min / (2.0 * grid.dim * visc));
  }
  return cfg.cfl * dt;
}

StepOutcome step(const Grid& grid, const FieldState& state, const BoundaryData& bd,
                 const SolverConfig& cfg, double dt, double t, const Forcing* forcing) {
  StepOutcome res;
  const std::size_t n = state.size();
  const RhsTerms r1 = evaluate_rhs(grid, state, bd, cfg, t, forcing);
  FieldState mid(n);
  for (std::size_t c = 0; c < n; ++c) {
    mid.rho[c] = state.rho[c] + dt * r1.drho[c];
    mid.mom[c] = {state.mom[c][0] + dt * r1.dmom[c][0], state.mom[c][1] + dt * r1.dmom[c][1]};
  }
  check_finite(mid, "step (stage 1)");
  if (auto c = first_negative(mid)) {
    res.rejected = true;
    res.diagnostic = "negative density in stage 1 at cell " + std::to_string(*c);
    return res;
  }
  const RhsTerms r2 = evaluate_rhs(grid, mid, bd, cfg, t + dt, forcing);
  res.state = FieldState(n);
  for (std::size_t c = 0; c < n; ++c) {
    res.state.rho[c] = state.rho[c] + dt * (0.5 * (r1.drho[c] + r2.drho[c]));
    for (int a = 0; a < 2; ++a) {
      res.state.mom[c][a] = state.mom[c][a] + dt * (0.5 * (r1.dmom[c][a] + r2.dmom[c][a]));
    }
  }
  check_finite(res.state, "step");
  if (auto c = first_negative(res.state)) {
    res.rejected = true;
    res.diagnostic = "negative density at cell " + std::to_string(*c);
    return res;
  }
  res.terms.dissipation = 0.5 * (r1.dissipation + r2.dissipation);
  res.terms.boundary_out = 0.5 * (r1.boundary_out + r2.boundary_out);
  res.terms.boundary_in = 0.5 * (r1.boundary_in + r2.boundary_in);
  res.terms.source = 0.5 * (r1.source + r2.source);
  res.terms.mass_outflux = 0.5 * (r1.mass_outflux + r2.mass_outflux);
  return res;
}

EnergyTrace::EnergyTrace(double initial, std::vector<double> times, std::vector<double> left,
                         std::vector<double> right, double jump_tolerance)
    : initial_(initial), times_(std::move(times)), left_(std::move(left)), right_(std::move(right)) {
  if (left_.size() != times_.size() || right_.size() != times_.size()) {
    throw PreconditionError("energy trace: array lengths differ");
  }
  for (std::size_t k = 1; k < times_.size(); ++k) {
    if (!(times_[k] > times_[k - 1])) throw PreconditionError("energy trace: times not increasing");
  }
  if (times_.empty()) return;
  left_[0] = initial_;
  right_[0] = std::min(right_[0], initial_);
  for (std::size_t k = 1; k < times_.size(); ++k) {
    if (right_[k] > left_[k] + jump_tolerance) {
      throw PreconditionError("energy trace: upward jump at t=" + std::to_string(times_[k]));
    }
  }
}

double EnergyTrace::value(double t) const {
  if (times_.empty() || t < times_.front()) return initial_;
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  if (it != times_.end() && *it == t) return left_[it - times_.begin()];
  if (it == times_.end()) return right_.back();
  const std::size_t k = static_cast<std::size_t>(it - times_.begin());
  const double t0 = times_[k - 1], t1 = times_[k];
  const double s = (t - t0) / (t1 - t0);
  return right_[k - 1] + s * (left_[k] - right_[k - 1]);
}

double EnergyTrace::right_limit(double t) const {
  if (times_.empty() || t < times_.front()) return initial_;
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  if (it != times_.end() && *it == t) return right_[it - times_.begin()];
  return value(t);
}

double EnergyTrace::total_variation() const {
  double tv = 0.0;
  for (std::size_t k = 0; k < times_.size(); ++k) {
    tv += std::abs(left_[k] - right_[k]);
    if (k + 1 < times_.size()) tv += std::abs(left_[k + 1] - right_[k]);
  }
  return tv;
}

std::vector<double> Trajectory::output_energies(const BoundaryData& bd,
                                                const EosParams& eos) const {
  std::vector<double> e;
  e.reserve(states.size());
  for (const auto& s : states) e.push_back(energy_or_inf(s, bd, grid, eos));
  return e;
}

double resolve_dt(const Grid& grid, const FieldState& initial, const BoundaryData& bd,
                  const SolverConfig& cfg, std::span<const double> output_times) {
  if (cfg.dt > 0.0) return cfg.dt;
  double dt = 0.9 * stable_dt(grid, initial, bd, cfg);
  if (!(dt > 0.0) || !std::isfinite(dt)) throw SolverError("could not resolve a finite time step");
  double h = 0.0;
  for (std::size_t k = 0; k < output_times.size() && h == 0.0; ++k) {
    const double prev = k == 0 ? 0.0 : output_times[k - 1];
    if (output_times[k] > prev) h = output_times[k] - prev;
  }
  if (h > 0.0) {
    bool aligned = true;
    for (double t : output_times) {
      const double q = t / h;
      aligned = aligned && std::abs(q - std::round(q)) <= 1e-9 * std::max(1.0, q);
    }
    if (aligned) dt = h / std::ceil(h / dt - 1e-12);
  }
  return dt;
}

namespace {

struct Advance {
  std::vector<StepRecord> records;
  FieldState end;
};

// Advances `state` by `dt` from time `t`, halving into 2^s equal substeps until every substep is
// CFL-admissible and density stays nonnegative.
Advance advance(const Grid& grid, const FieldState& state, const BoundaryData& bd,
                const SolverConfig& cfg, double t, double dt, const Forcing* forcing,
                int max_halvings) {
  std::string last_diag = "step exceeds the CFL bound";
  for (int s = 0; s <= max_halvings; ++s) {
    const long count = 1L << s;
    const double h = dt / static_cast<double>(count);
    Advance adv;
    FieldState cur = state;
    bool ok = true;
    for (long k = 0; k < count; ++k) {
      const double tk = t + static_cast<double>(k) * h;
      if (h > stable_dt(grid, cur, bd, cfg) * (1.0 + 1e-12)) {
        ok = false;
        last_diag = "step exceeds the CFL bound at t=" + std::to_string(tk);
        break;
      }
      StepOutcome out = step(grid, cur, bd, cfg, h, tk, forcing);
      if (out.rejected) {
        ok = false;
        last_diag = out.diagnostic + " at t=" + std::to_string(tk);
        break;
      }
      StepRecord rec;
      rec.t = tk;
      rec.dt = h;
      rec.terms = out.terms;
      rec.energy_begin = energy_or_inf(cur, bd, grid, cfg.eos);
      rec.energy_end = energy_or_inf(out.state, bd, grid, cfg.eos);
      rec.mass_residual =
          total_mass(out.state, grid) - total_mass(cur, grid) + h * out.terms.mass_outflux;
      const Vec2 p0 = total_momentum(cur, grid), p1 = total_momentum(out.state, grid);
      rec.energy_residual = rec.energy_end - rec.energy_begin +
                            h * (out.terms.dissipation + out.terms.boundary_out +
                                 out.terms.boundary_in - out.terms.source);
      rec.begin = std::move(cur);
      cur = std::move(out.state);
      // Momentum change against the cell-summed right-hand side of the final stage average.
      rec.momentum_residual = std::hypot(p1[0] - p0[0], p1[1] - p0[1]);
      adv.records.push_back(std::move(rec));
    }
    if (ok) {
      adv.end = std::move(cur);
      return adv;
    }
  }
  throw SolverError("integration failed after " + std::to_string(max_halvings) +
                    " halvings: " + last_diag);
}

}  // namespace

Trajectory integrate(const Grid& grid, const FieldState& initial, const BoundaryData& bd,
                     const SolverConfig& cfg, std::span<const double> output_times,
                     const IntegrateOptions& options) {
  cfg.validate();
  validate_boundary(bd, grid);
  if (initial.size() != grid.cell_count()) throw PreconditionError("integrate: state/grid mismatch");
  for (std::size_t c = 0; c < initial.size(); ++c) {
    if (!std::isfinite(initial.rho[c]) || !std::isfinite(initial.mom[c][0]) || !std::isfinite(initial.mom[c][1]))
      throw PreconditionError("integrate: non-finite initial state");
  }
  if (first_negative(initial)) throw PreconditionError("integrate: negative initial density");
  if (output_times.empty()) throw PreconditionError("integrate: no output times");
  for (std::size_t k = 0; k < output_times.size(); ++k) {
    if (!(output_times[k] >= 0.0) || (k > 0 && !(output_times[k] > output_times[k - 1]))) {
      throw PreconditionError("integrate: output times must be nonnegative and increasing");
    }
  }

  Trajectory traj;
  traj.grid = grid;
  traj.forcing = options.forcing;
  traj.dt = resolve_dt(grid, initial, bd, cfg, output_times);
  const double dt = traj.dt;
  const Forcing* forcing = options.forcing.get();

  const double e_state0 = energy_or_inf(initial, bd, grid, cfg.eos);
  if (!std::isfinite(e_state0)) throw PreconditionError("integrate: initial energy is infinite");
  const double e0 = options.initial_energy.value_or(e_state0);
  if (e0 < e_state0 - 1e-12 * std::max(1.0, std::abs(e_state0))) {
    throw PreconditionError("integrate: E_0 below the energy of the initial state");
  }

  // Grid index of each output and whether it sits on the grid.
  struct Slot {
    long index;
    bool on_grid;
  };
  std::vector<Slot> slots;
  for (double to : output_times) {
    const double q = to / dt;
    const long k = std::llround(q);
    if (std::abs(static_cast<double>(k) * dt - to) <= 1e-12 * std::max(1.0, to)) {
      slots.push_back({k, true});
    } else {
      slots.push_back({static_cast<long>(std::floor(q)), false});
    }
  }
  const long last = slots.back().index;

  std::vector<double> tr_times{0.0}, tr_left{e0}, tr_right{e_state0};
  FieldState state = initial;
  std::size_t next_out = 0;
  for (long k = 0;; ++k) {
    const double tk = static_cast<double>(k) * dt;
    while (next_out < slots.size() && slots[next_out].index == k) {
      const double to = output_times[next_out];
      traj.times.push_back(to);
      traj.base_step.push_back(traj.steps.size());
      if (slots[next_out].on_grid) {
        traj.states.push_back(state);
        traj.branches.emplace_back();
      } else {
        Advance branch = advance(grid, state, bd, cfg, tk, to - tk, forcing, options.max_halvings);
        traj.states.push_back(std::move(branch.end));
        traj.branches.push_back(std::move(branch.records));
      }
      ++next_out;
    }
    if (k >= last) break;
    Advance adv = advance(grid, state, bd, cfg, tk, dt, forcing, options.max_halvings);
    for (auto& rec : adv.records) {
      tr_times.push_back(rec.t + rec.dt);
      tr_left.push_back(rec.energy_end);
      tr_right.push_back(rec.energy_end);
      traj.steps.push_back(std::move(rec));
    }
    // Grid times are k * dt exactly; the substep sum may differ in the last bit.
    tr_times.back() = static_cast<double>(k + 1) * dt;
    state = std::move(adv.end);
  }
  traj.final_state = std::move(state);
  traj.energy_trace = EnergyTrace(e0, std::move(tr_times), std::move(tr_left), std::move(tr_right));
  return traj;
}

namespace {

// Sums f(record, end state) over the steps carrying output k to output k + 1: grid steps between
// the two base states, plus the branch into k + 1, minus the branch into k.
template <class T, class F>
T interval_sum(const Trajectory& traj, std::size_t k, T zero, F&& f) {
  auto add = [](T& acc, const T& v, double sign) {
    if constexpr (std::is_same_v<T, double>) {
      acc += sign * v;
    } else {
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += sign * v[i];
    }
  };
  T acc = zero;
  for (std::size_t n = traj.base_step[k]; n < traj.base_step[k + 1]; ++n) {
    add(acc, f(traj.steps[n], traj.step_end(n)), 1.0);
  }
  for (int side = 0; side < 2; ++side) {
    const std::size_t o = k + (side == 0 ? 1 : 0);
    const auto& br = traj.branches[o];
    for (std::size_t n = 0; n < br.size(); ++n) {
      const FieldState& end = n + 1 < br.size() ? br[n + 1].begin : traj.states[o];
      add(acc, f(br[n], end), side == 0 ? 1.0 : -1.0);
    }
  }
  return acc;
}

}  // namespace

std::vector<double> energy_inequality_residual(const Trajectory& traj, const BoundaryData& bd,
                                               const SolverConfig& cfg) {
  // Trace value at on-grid outputs, branch-end energy otherwise.
  std::vector<double> e(traj.times.size());
  for (std::size_t k = 0; k < e.size(); ++k) {
    e[k] = traj.branches[k].empty() ? traj.energy_trace.value(traj.times[k])
                                    : energy_or_inf(traj.states[k], bd, traj.grid, cfg.eos);
  }
  std::vector<double> res;
  for (std::size_t k = 0; k + 1 < traj.times.size(); ++k) {
    const double integral =
        interval_sum(traj, k, 0.0, [](const StepRecord& s, const FieldState&) {
          return s.dt * (s.terms.dissipation + s.terms.boundary_out + s.terms.boundary_in -
                         s.terms.source);
        });
    res.push_back(e[k + 1] - e[k] + integral);
  }
  return res;
}

std::vector<double> mass_balance_residual(const Trajectory& traj, const BoundaryData& bd) {
  (void)bd;
  std::vector<double> res;
  for (std::size_t k = 0; k + 1 < traj.times.size(); ++k) {
    const double outflow = interval_sum(traj, k, 0.0, [](const StepRecord& s, const FieldState&) {
      return s.dt * s.terms.mass_outflux;
    });
    res.push_back(total_mass(traj.states[k + 1], traj.grid) - total_mass(traj.states[k], traj.grid) +
                  outflow);
  }
  return res;
}

std::vector<std::vector<double>> projected_mass_residual(const Trajectory& traj,
                                                         const BoundaryData& bd,
                                                         const SolverConfig& cfg,
                                                         const SpectralBasis& basis) {
  const Forcing* forcing = traj.forcing.get();
  auto rate = [&](const FieldState& s, double t) {
    const RhsTerms r = evaluate_rhs(traj.grid, s, bd, cfg, t, forcing);
    return project_scalar(r.drho, basis);
  };
  std::vector<std::vector<double>> res;
  for (std::size_t n = 0; n < traj.steps.size(); ++n) {
    const auto& s = traj.steps[n];
    const FieldState& end = traj.step_end(n);
    const auto c0 = project_scalar(s.begin.rho, basis);
    const auto c1 = project_scalar(end.rho, basis);
    const auto f0 = rate(s.begin, s.t), f1 = rate(end, s.t + s.dt);
    std::vector<double> row(basis.size());
    for (std::size_t i = 0; i < row.size(); ++i) {
      row[i] = (c1[i] - c0[i]) - s.dt * 0.5 * (f0[i] + f1[i]);
    }
    res.push_back(std::move(row));
  }
  return res;
}

std::vector<double> momentum_projection_rhs(const Grid& grid, const FieldState& state,
                                            const BoundaryData& bd, const SolverConfig& cfg,
                                            const SpectralBasis& basis, double t,
                                            const Forcing* forcing) {
  const auto u = velocity_field(state, bd);
  GhostVelocity gu(grid, u, bd);
  const double vol = grid.cell_volume();
  std::vector<double> out(basis.vector_modes.size(), 0.0);
  for (int j = 0; j < grid.ny(); ++j) {
    for (int i = 0; i < grid.nx(); ++i) {
      const std::size_t c = grid.index(i, j);
      const double rho = state.rho[c];
      const double p = pressure(rho, cfg.eos);
      const Mat2 s = viscous_stress(cell_gradient(gu, grid, i, j), grid.dim, cfg);
      Vec2 g = bd.g[c];
      if (forcing && forcing->force) {
        g = forcing->force(t, grid.cell_center(c));
        if (grid.dim == 1) g[1] = 0.0;
      }
      for (std::size_t m = 0; m < out.size(); ++m) {
        const auto& vm = basis.vector_modes[m];
        const int a = vm.component;
        const double w = basis.scalar_modes[vm.scalar].value[c];
        const Vec2 grad = basis.scalar_modes[vm.scalar].gradient[c];
        // Row a of grad w is grad r; every other row vanishes.
        double integrand = p * grad[a] + rho * g[a] * w;
        for (int b = 0; b < grid.dim; ++b) {
          integrand += (rho * u[c][a] * u[c][b] - s[a][b]) * grad[b];
        }
        out[m] += integrand * vol;
      }
    }
  }
  return out;
}

std::vector<std::vector<double>> momentum_projection_residual(const Trajectory& traj,
                                                              const BoundaryData& bd,
                                                              const SolverConfig& cfg,
                                                              const SpectralBasis& basis) {
  const Forcing* forcing = traj.forcing.get();
  std::vector<std::vector<double>> res;
  for (std::size_t k = 0; k + 1 < traj.times.size(); ++k) {
    const auto integral = interval_sum(
        traj, k, std::vector<double>(basis.vector_modes.size(), 0.0),
        [&](const StepRecord& s, const FieldState& end) {
          auto f0 = momentum_projection_rhs(traj.grid, s.begin, bd, cfg, basis, s.t, forcing);
          const auto f1 =
              momentum_projection_rhs(traj.grid, end, bd, cfg, basis, s.t + s.dt, forcing);
          for (std::size_t i = 0; i < f0.size(); ++i) f0[i] = 0.5 * s.dt * (f0[i] + f1[i]);
          return f0;
        });
    const auto w0 = project_vector(traj.states[k].mom, basis);
    const auto w1 = project_vector(traj.states[k + 1].mom, basis);
    std::vector<double> row(integral.size());
    for (std::size_t i = 0; i < row.size(); ++i) row[i] = w1[i] - w0[i] - integral[i];
    res.push_back(std::move(row));
  }
  return res;
}

EnergyValue integrated_relative_energy(const FieldState& state, const FieldState& reference,
                                       const Grid& grid, const EosParams& eos) {
  if (state.size() != reference.size()) {
    throw PreconditionError("integrated_relative_energy: shape mismatch");
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < state.size(); ++c) {
    const auto e = relative_energy_density(state.rho[c], state.mom[c], reference.rho[c],
                                           reference.mom[c], eos);
    if (!e.finite) return EnergyValue::infinite();
    sum += e.value;
  }
  return {sum * grid.cell_volume(), true};
}

}  // namespace statns
