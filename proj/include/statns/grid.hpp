#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "statns/eos.hpp"

namespace statns {

/// Uniform structured grid on [0, Lx] (dim 1) or [0, Lx] x [0, Ly] (dim 2).
///
/// Cells are stored row-major with x fastest: index = j * nx + i. In one dimension the grid
/// carries a unit cross-section (ny = 1, Ly = 1) so that cell volumes and face areas follow the
/// same formulas in both cases.
struct Grid {
  int dim = 1;
  std::array<int, 2> cells{4, 1};
  std::array<double, 2> extents{1.0, 1.0};
  std::array<double, 2> spacing{0.25, 1.0};

  int nx() const { return cells[0]; }
  int ny() const { return cells[1]; }
  std::size_t cell_count() const { return static_cast<std::size_t>(cells[0]) * cells[1]; }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * cells[0] + i; }
  double cell_volume() const { return spacing[0] * spacing[1]; }
  double volume() const { return extents[0] * extents[1]; }
  Vec2 cell_center(int i, int j) const {
    return {(i + 0.5) * spacing[0], dim == 2 ? (j + 0.5) * spacing[1] : 0.0};
  }
  Vec2 cell_center(std::size_t c) const {
    return cell_center(static_cast<int>(c % cells[0]), static_cast<int>(c / cells[0]));
  }
  double min_spacing() const { return dim == 2 ? std::min(spacing[0], spacing[1]) : spacing[0]; }

  bool operator==(const Grid&) const = default;
};

/// Builds and validates a grid; throws PreconditionError on nonpositive extents or fewer than
/// four cells per axis. `extents`/`cells` entries beyond `dim` are ignored.
Grid build_grid(int dim, std::array<double, 2> extents, std::array<int, 2> cells);

/// Boundary face of the rectangle. Faces are listed left (x = 0), right, bottom (y = 0), top;
/// within a side by increasing cell index.
struct BoundaryFace {
  std::size_t cell = 0;  ///< adjacent interior cell
  Vec2 normal{};         ///< outward unit normal
  Vec2 center{};
  double area = 1.0;
  int axis = 0;  ///< 0 for x-faces, 1 for y-faces
};

std::vector<BoundaryFace> boundary_faces(const Grid& grid);

/// Cell-averaged density and momentum. In one dimension mom[c][1] is identically zero.
struct FieldState {
  std::vector<double> rho;
  std::vector<Vec2> mom;

  FieldState() = default;
  explicit FieldState(std::size_t n) : rho(n, 0.0), mom(n, Vec2{0.0, 0.0}) {}
  std::size_t size() const { return rho.size(); }
  bool operator==(const FieldState&) const = default;
};

/// Boundary data d_B = [rho_B, u_B, g] sampled on the grid.
///
/// `u_face`/`rho_face` live on boundary faces (ordering of boundary_faces), `u_cell` is the
/// C^1 lifting of u_B into the interior, `u_corner` holds u_B at the four domain corners
/// (2D only; order (0,0), (Lx,0), (0,Ly), (Lx,Ly)). `potential`, when present, is a G with
/// g = grad G sampled on cells.
struct BoundaryData {
  std::vector<double> rho_face;
  std::vector<Vec2> u_face;
  std::vector<Vec2> u_cell;
  std::vector<Vec2> grad_u_cell_x;  ///< d u_B / dx on cells
  std::vector<Vec2> grad_u_cell_y;  ///< d u_B / dy on cells
  std::array<Vec2, 4> u_corner{};
  std::vector<Vec2> g;
  std::optional<std::vector<double>> potential;
  double rho_floor = 0.0;  ///< declared lower bound for rho_B

  bool operator==(const BoundaryData&) const = default;

  bool closed() const;  ///< u_B == 0 everywhere
  bool force_free() const;
};

/// Samples boundary data from point functions. u_B gradients on cells come from centred
/// differences of `velocity` with step h/2; `potential` (optional) must satisfy g = grad G.
BoundaryData boundary_from_functions(const Grid& grid, const std::function<double(Vec2)>& rho_b,
                                     const std::function<Vec2(Vec2)>& velocity,
                                     const std::function<Vec2(Vec2)>& force,
                                     const std::function<double(Vec2)>& potential,
                                     double rho_floor);

/// Closed box: u_B = 0, g = 0, rho_B = rho_b.
BoundaryData wall_boundary(const Grid& grid, double rho_b = 1.0);

/// Validates BoundaryData against the grid (array sizes, rho_B >= rho_floor > 0).
void validate_boundary(const BoundaryData& bd, const Grid& grid);

/// Tolerance for classifying a face as characteristic, relative to the boundary velocity scale.
inline constexpr double kBoundaryTolerance = 1e-12;

enum class FaceKind { inflow, outflow, characteristic };

struct BoundaryPartition {
  std::vector<FaceKind> kind;  ///< per boundary face
  std::vector<std::size_t> inflow, outflow, characteristic;
};

BoundaryPartition classify_boundary(const BoundaryData& bd, const Grid& grid);

/// Orthonormal discrete Dirichlet eigenfunctions.
///
/// Scalar modes are eigenvectors of the cell-centred five-point (three-point in 1D) Dirichlet
/// Laplacian with the antisymmetric ghost extension, i.e. products of sin(k pi x / L). Values and
/// exact gradients of the underlying sine products are stored at cell centres. Vector modes are
/// scalar modes times a coordinate unit vector, ordered by (scalar mode, component).
struct SpectralBasis {
  struct ScalarMode {
    std::array<int, 2> wavenumber{1, 0};
    double eigenvalue = 0.0;
    std::vector<double> value;
    std::vector<Vec2> gradient;
  };
  struct VectorMode {
    std::size_t scalar = 0;  ///< index into scalar_modes
    int component = 0;
    double eigenvalue = 0.0;
  };

  std::vector<ScalarMode> scalar_modes;
  std::vector<VectorMode> vector_modes;
  double cell_volume = 1.0;

  std::size_t size() const { return scalar_modes.size(); }
  /// Value of vector mode i at cell c.
  Vec2 vector_value(std::size_t i, std::size_t c) const;
  /// Gradient of vector mode i at cell c as rows: result[a] = grad of component a.
  std::array<Vec2, 2> vector_gradient(std::size_t i, std::size_t c) const;
};

/// M scalar and M vector modes with the smallest eigenvalues. Throws PreconditionError when M
/// exceeds the number of cells.
SpectralBasis build_spectral_basis(const Grid& grid, std::size_t modes);

/// Discrete Dirichlet eigenvalue (2/h^2)(1 - cos(k pi h / L)) of the 1D cell-centred Laplacian.
double dirichlet_eigenvalue_1d(int k, double h, double length);

std::vector<double> project_scalar(std::span<const double> field, const SpectralBasis& basis);
std::vector<double> project_vector(std::span<const Vec2> field, const SpectralBasis& basis);

/// Inverse of project_scalar on the span of the basis.
std::vector<double> reconstruct_scalar(std::span<const double> coefficients,
                                       const SpectralBasis& basis);

/// Total energy sum_c E(rho, m | u_B) |cell|; nullopt when some cell is infinite.
std::optional<double> total_energy(const FieldState& state, const BoundaryData& bd,
                                   const Grid& grid, const EosParams& eos);
double total_mass(const FieldState& state, const Grid& grid);
Vec2 total_momentum(const FieldState& state, const Grid& grid);
/// Discrete L2 distance between two states on the same grid (density and momentum together).
double l2_distance(const FieldState& a, const FieldState& b, const Grid& grid);

}  // namespace statns
