#include "statns/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "statns/error.hpp"

namespace statns {

Grid build_grid(int dim, std::array<double, 2> extents, std::array<int, 2> cells) {
  if (dim != 1 && dim != 2) throw PreconditionError("grid dimension must be 1 or 2");
  Grid g;
  g.dim = dim;
  for (int a = 0; a < dim; ++a) {
    if (!(extents[a] > 0.0)) throw PreconditionError("grid extent must be positive");
    if (cells[a] < 4) throw PreconditionError("grid needs at least 4 cells per axis");
    g.extents[a] = extents[a];
    g.cells[a] = cells[a];
    g.spacing[a] = extents[a] / cells[a];
  }
  if (dim == 1) {
    g.extents[1] = 1.0;
    g.cells[1] = 1;
    g.spacing[1] = 1.0;
  }
  return g;
}

std::vector<BoundaryFace> boundary_faces(const Grid& grid) {
  std::vector<BoundaryFace> faces;
  const int nx = grid.nx(), ny = grid.ny();
  const double hx = grid.spacing[0], hy = grid.spacing[1];
  for (int j = 0; j < ny; ++j) {
    const double y = grid.dim == 2 ? (j + 0.5) * hy : 0.0;
    faces.push_back({grid.index(0, j), {-1.0, 0.0}, {0.0, y}, hy, 0});
  }
  for (int j = 0; j < ny; ++j) {
    const double y = grid.dim == 2 ? (j + 0.5) * hy : 0.0;
    faces.push_back({grid.index(nx - 1, j), {1.0, 0.0}, {grid.extents[0], y}, hy, 0});
  }
  if (grid.dim == 2) {
    for (int i = 0; i < nx; ++i) {
      faces.push_back({grid.index(i, 0), {0.0, -1.0}, {(i + 0.5) * hx, 0.0}, hx, 1});
    }
    for (int i = 0; i < nx; ++i) {
      faces.push_back(
          {grid.index(i, ny - 1), {0.0, 1.0}, {(i + 0.5) * hx, grid.extents[1]}, hx, 1});
    }
  }
  return faces;
}

bool BoundaryData::closed() const {
  auto zero = [](const Vec2& v) { return v[0] == 0.0 && v[1] == 0.0; };
  return std::all_of(u_face.begin(), u_face.end(), zero) &&
         std::all_of(u_cell.begin(), u_cell.end(), zero) &&
         std::all_of(u_corner.begin(), u_corner.end(), zero);
}

bool BoundaryData::force_free() const {
  return std::all_of(g.begin(), g.end(), [](const Vec2& v) { return v[0] == 0.0 && v[1] == 0.0; });
}

BoundaryData boundary_from_functions(const Grid& grid, const std::function<double(Vec2)>& rho_b,
                                     const std::function<Vec2(Vec2)>& velocity,
                                     const std::function<Vec2(Vec2)>& force,
                                     const std::function<double(Vec2)>& potential,
                                     double rho_floor) {
  BoundaryData bd;
  bd.rho_floor = rho_floor;
  for (const auto& f : boundary_faces(grid)) {
    bd.rho_face.push_back(rho_b(f.center));
    bd.u_face.push_back(velocity(f.center));
  }
  const std::size_t n = grid.cell_count();
  bd.u_cell.resize(n);
  bd.grad_u_cell_x.resize(n);
  bd.grad_u_cell_y.assign(n, Vec2{0.0, 0.0});
  bd.g.resize(n);
  if (potential) bd.potential.emplace(n);
  const double dx = 0.5 * grid.spacing[0], dy = 0.5 * grid.spacing[1];
  for (std::size_t c = 0; c < n; ++c) {
    const Vec2 x = grid.cell_center(c);
    bd.u_cell[c] = velocity(x);
    const Vec2 xp = velocity({x[0] + dx, x[1]}), xm = velocity({x[0] - dx, x[1]});
    bd.grad_u_cell_x[c] = {(xp[0] - xm[0]) / (2 * dx), (xp[1] - xm[1]) / (2 * dx)};
    if (grid.dim == 2) {
      const Vec2 yp = velocity({x[0], x[1] + dy}), ym = velocity({x[0], x[1] - dy});
      bd.grad_u_cell_y[c] = {(yp[0] - ym[0]) / (2 * dy), (yp[1] - ym[1]) / (2 * dy)};
    }
    bd.g[c] = force(x);
    if (grid.dim == 1) {
      bd.u_cell[c][1] = 0.0;
      bd.grad_u_cell_x[c][1] = 0.0;
      bd.g[c][1] = 0.0;
    }
    if (potential) (*bd.potential)[c] = potential(x);
  }
  if (grid.dim == 1) {
    for (auto& u : bd.u_face) u[1] = 0.0;
  } else {
    const double lx = grid.extents[0], ly = grid.extents[1];
    bd.u_corner = {velocity({0.0, 0.0}), velocity({lx, 0.0}), velocity({0.0, ly}),
                   velocity({lx, ly})};
  }
  validate_boundary(bd, grid);
  return bd;
}

BoundaryData wall_boundary(const Grid& grid, double rho_b) {
  return boundary_from_functions(
      grid, [rho_b](Vec2) { return rho_b; }, [](Vec2) { return Vec2{0.0, 0.0}; },
      [](Vec2) { return Vec2{0.0, 0.0}; }, nullptr, rho_b);
}

void validate_boundary(const BoundaryData& bd, const Grid& grid) {
  const std::size_t nf = boundary_faces(grid).size();
  const std::size_t n = grid.cell_count();
  if (bd.rho_face.size() != nf || bd.u_face.size() != nf) {
    throw PreconditionError("boundary data: face arrays do not match the grid");
  }
  if (bd.u_cell.size() != n || bd.g.size() != n || bd.grad_u_cell_x.size() != n ||
      bd.grad_u_cell_y.size() != n) {
    throw PreconditionError("boundary data: cell arrays do not match the grid");
  }
  if (bd.potential && bd.potential->size() != n) {
    throw PreconditionError("boundary data: potential does not match the grid");
  }
  if (!(bd.rho_floor > 0.0)) throw PreconditionError("boundary data: rho_floor must be positive");
  for (double r : bd.rho_face) {
    if (!(r >= bd.rho_floor)) {
      throw PreconditionError("boundary data: rho_B below declared floor " +
                              std::to_string(bd.rho_floor));
    }
  }
}

BoundaryPartition classify_boundary(const BoundaryData& bd, const Grid& grid) {
  const auto faces = boundary_faces(grid);
  double scale = 0.0;
  for (const auto& u : bd.u_face) scale = std::max(scale, std::sqrt(norm2(u)));
  const double tol = kBoundaryTolerance * std::max(scale, 1.0);
  BoundaryPartition part;
  part.kind.resize(faces.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const double un = dot(bd.u_face[f], faces[f].normal);
    if (un < -tol) {
      part.kind[f] = FaceKind::inflow;
      part.inflow.push_back(f);
    } else if (un > tol) {
      part.kind[f] = FaceKind::outflow;
      part.outflow.push_back(f);
    } else {
      part.kind[f] = FaceKind::characteristic;
      part.characteristic.push_back(f);
    }
  }
  return part;
}

double dirichlet_eigenvalue_1d(int k, double h, double length) {
  return 2.0 / (h * h) * (1.0 - std::cos(k * M_PI * h / length));
}

Vec2 SpectralBasis::vector_value(std::size_t i, std::size_t c) const {
  const auto& vm = vector_modes[i];
  Vec2 v{0.0, 0.0};
  v[vm.component] = scalar_modes[vm.scalar].value[c];
  return v;
}

std::array<Vec2, 2> SpectralBasis::vector_gradient(std::size_t i, std::size_t c) const {
  const auto& vm = vector_modes[i];
  std::array<Vec2, 2> g{Vec2{0.0, 0.0}, Vec2{0.0, 0.0}};
  g[vm.component] = scalar_modes[vm.scalar].gradient[c];
  return g;
}

SpectralBasis build_spectral_basis(const Grid& grid, std::size_t modes) {
  const std::size_t n = grid.cell_count();
  if (modes == 0 || modes > n) {
    throw PreconditionError("spectral basis: mode count must be in [1, " + std::to_string(n) + "]");
  }
  struct Candidate {
    int kx, ky;
    double eigenvalue;
  };
  std::vector<Candidate> cands;
  const int kymax = grid.dim == 2 ? grid.ny() : 0;
  for (int kx = 1; kx <= grid.nx(); ++kx) {
    const double lx = dirichlet_eigenvalue_1d(kx, grid.spacing[0], grid.extents[0]);
    if (grid.dim == 1) {
      cands.push_back({kx, 0, lx});
      continue;
    }
    for (int ky = 1; ky <= kymax; ++ky) {
      cands.push_back({kx, ky, lx + dirichlet_eigenvalue_1d(ky, grid.spacing[1], grid.extents[1])});
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return a.eigenvalue < b.eigenvalue;
  });

  SpectralBasis basis;
  basis.cell_volume = grid.cell_volume();
  const double lx = grid.extents[0], ly = grid.extents[1];
  for (std::size_t m = 0; m < modes; ++m) {
    const auto& cand = cands[m];
    SpectralBasis::ScalarMode mode;
    mode.wavenumber = {cand.kx, cand.ky};
    mode.eigenvalue = cand.eigenvalue;
    mode.value.resize(n);
    mode.gradient.resize(n);
    const double ax = cand.kx * M_PI / lx;
    const double ay = cand.ky * M_PI / ly;
    double norm_sq = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const Vec2 x = grid.cell_center(c);
      const double sx = std::sin(ax * x[0]), cx = std::cos(ax * x[0]);
      if (grid.dim == 1) {
        mode.value[c] = sx;
        mode.gradient[c] = {ax * cx, 0.0};
      } else {
        const double sy = std::sin(ay * x[1]), cy = std::cos(ay * x[1]);
        mode.value[c] = sx * sy;
        mode.gradient[c] = {ax * cx * sy, ay * sx * cy};
      }
      norm_sq += mode.value[c] * mode.value[c] * basis.cell_volume;
    }
    const double scale = 1.0 / std::sqrt(norm_sq);
    for (std::size_t c = 0; c < n; ++c) {
      mode.value[c] *= scale;
      mode.gradient[c][0] *= scale;
      mode.gradient[c][1] *= scale;
    }
    basis.scalar_modes.push_back(std::move(mode));
  }
  for (std::size_t m = 0; basis.vector_modes.size() < modes; ++m) {
    for (int comp = 0; comp < grid.dim && basis.vector_modes.size() < modes; ++comp) {
      basis.vector_modes.push_back({m, comp, basis.scalar_modes[m].eigenvalue});
    }
  }
  return basis;
}

std::vector<double> project_scalar(std::span<const double> field, const SpectralBasis& basis) {
  std::vector<double> out(basis.size(), 0.0);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const auto& r = basis.scalar_modes[i].value;
    if (r.size() != field.size()) throw PreconditionError("project_scalar: shape mismatch");
    double s = 0.0;
    for (std::size_t c = 0; c < field.size(); ++c) s += field[c] * r[c];
    out[i] = s * basis.cell_volume;
  }
  return out;
}

std::vector<double> project_vector(std::span<const Vec2> field, const SpectralBasis& basis) {
  std::vector<double> out(basis.vector_modes.size(), 0.0);
  for (std::size_t i = 0; i < basis.vector_modes.size(); ++i) {
    const auto& vm = basis.vector_modes[i];
    const auto& r = basis.scalar_modes[vm.scalar].value;
    if (r.size() != field.size()) throw PreconditionError("project_vector: shape mismatch");
    double s = 0.0;
    for (std::size_t c = 0; c < field.size(); ++c) s += field[c][vm.component] * r[c];
    out[i] = s * basis.cell_volume;
  }
  return out;
}

std::vector<double> reconstruct_scalar(std::span<const double> coefficients,
                                       const SpectralBasis& basis) {
  if (coefficients.size() != basis.size()) {
    throw PreconditionError("reconstruct_scalar: coefficient count mismatch");
  }
  const std::size_t n = basis.scalar_modes.front().value.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    for (std::size_t c = 0; c < n; ++c) out[c] += coefficients[i] * basis.scalar_modes[i].value[c];
  }
  return out;
}

std::optional<double> total_energy(const FieldState& state, const BoundaryData& bd,
                                   const Grid& grid, const EosParams& eos) {
  double sum = 0.0;
  for (std::size_t c = 0; c < state.size(); ++c) {
    const auto e = energy_density(state.rho[c], state.mom[c], bd.u_cell[c], eos);
    if (!e.finite) return std::nullopt;
    sum += e.value;
  }
  return sum * grid.cell_volume();
}

double total_mass(const FieldState& state, const Grid& grid) {
  double sum = 0.0;
  for (double r : state.rho) sum += r;
  return sum * grid.cell_volume();
}

Vec2 total_momentum(const FieldState& state, const Grid& grid) {
  Vec2 sum{0.0, 0.0};
  for (const auto& m : state.mom) {
    sum[0] += m[0];
    sum[1] += m[1];
  }
  return {sum[0] * grid.cell_volume(), sum[1] * grid.cell_volume()};
}

double l2_distance(const FieldState& a, const FieldState& b, const Grid& grid) {
  if (a.size() != b.size()) throw PreconditionError("l2_distance: shape mismatch");
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const double dr = a.rho[c] - b.rho[c];
    const double m0 = a.mom[c][0] - b.mom[c][0], m1 = a.mom[c][1] - b.mom[c][1];
    s += dr * dr + m0 * m0 + m1 * m1;
  }
  return std::sqrt(s * grid.cell_volume());
}

}  // namespace statns
