#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "statns/error.hpp"
#include "statns/grid.hpp"

using namespace statns;

namespace {

// Dense cell-centred Dirichlet Laplacian with the antisymmetric ghost extension.
Eigen::MatrixXd dirichlet_laplacian(const Grid& g) {
  const int nx = g.nx(), ny = g.dim == 2 ? g.ny() : 1;
  const int n = nx * ny;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  auto axis = [&](int i, int j, int di, int dj, double h) {
    const int row = j * nx + i;
    A(row, row) += 2.0 / (h * h);
    for (int s : {-1, 1}) {
      const int ii = i + s * di, jj = j + s * dj;
      if (ii < 0 || jj < 0 || ii >= nx || jj >= ny) {
        A(row, row) += 1.0 / (h * h);
      } else {
        A(row, jj * nx + ii) -= 1.0 / (h * h);
      }
    }
  };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      axis(i, j, 1, 0, g.spacing[0]);
      if (g.dim == 2) axis(i, j, 0, 1, g.spacing[1]);
    }
  }
  return A;
}

}  // namespace

TEST_CASE("grid construction and preconditions") {
  const Grid g = build_grid(2, {2.0, 1.0}, {8, 4});
  CHECK(g.cell_count() == 32);
  CHECK(g.spacing[0] == doctest::Approx(0.25));
  CHECK(g.cell_volume() == doctest::Approx(0.0625));
  CHECK_THROWS_AS(build_grid(1, {1.0, 1.0}, {3, 1}), PreconditionError);
  CHECK_THROWS_AS(build_grid(2, {1.0, -1.0}, {8, 8}), PreconditionError);
  CHECK_THROWS_AS(build_grid(3, {1.0, 1.0}, {8, 8}), PreconditionError);
}

TEST_CASE("spectral eigenvalues match a dense eigensolver") {
  for (const Grid& g : {build_grid(1, {1.0, 1.0}, {24, 1}), build_grid(2, {1.0, 2.0}, {10, 12})}) {
    const std::size_t M = 8;
    const SpectralBasis b = build_spectral_basis(g, M);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dirichlet_laplacian(g));
    const Eigen::VectorXd ev = es.eigenvalues();
    for (std::size_t i = 0; i < M; ++i) {
      CHECK(b.scalar_modes[i].eigenvalue == doctest::Approx(ev(static_cast<int>(i))).epsilon(1e-9));
    }
    // Orthonormality in the cell inner product and eigenvector property.
    const Eigen::MatrixXd A = dirichlet_laplacian(g);
    for (std::size_t i = 0; i < M; ++i) {
      const auto& vi = b.scalar_modes[i].value;
      Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(vi.data(), static_cast<int>(vi.size()));
      CHECK((A * v - b.scalar_modes[i].eigenvalue * v).norm() <= 1e-8 * b.scalar_modes[i].eigenvalue * v.norm());
      for (std::size_t j = 0; j < M; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < vi.size(); ++c) s += vi[c] * b.scalar_modes[j].value[c];
        CHECK(s * g.cell_volume() == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("1D discrete eigenvalue formula") {
  const double h = 1.0 / 16;
  CHECK(dirichlet_eigenvalue_1d(1, h, 1.0) == doctest::Approx(2.0 / (h * h) * (1 - std::cos(M_PI * h))));
  CHECK(dirichlet_eigenvalue_1d(1, h, 1.0) == doctest::Approx(M_PI * M_PI).epsilon(1e-2));
}

TEST_CASE("projection and reconstruction round trip on the span") {
  const Grid g = build_grid(2, {1.0, 1.0}, {8, 8});
  const SpectralBasis b = build_spectral_basis(g, 6);
  const std::vector<double> coeff{0.3, -1.0, 0.25, 0.0, 2.0, -0.5};
  const auto field = reconstruct_scalar(coeff, b);
  const auto back = project_scalar(field, b);
  for (std::size_t i = 0; i < coeff.size(); ++i) CHECK(back[i] == doctest::Approx(coeff[i]).epsilon(1e-12));
  CHECK_THROWS_AS(build_spectral_basis(g, 65), PreconditionError);
}

TEST_CASE("boundary classification of a channel") {
  const Grid g = build_grid(1, {1.0, 1.0}, {8, 1});
  const auto bd = boundary_from_functions(
      g, [](Vec2) { return 1.0; }, [](Vec2) { return Vec2{1.0, 0.0}; }, [](Vec2) { return Vec2{0.0, 0.0}; },
      nullptr, 0.5);
  const auto part = classify_boundary(bd, g);
  CHECK(part.inflow.size() == 1);
  CHECK(part.outflow.size() == 1);
  CHECK(part.characteristic.empty());
  const auto wall = wall_boundary(g);
  CHECK(wall.closed());
  CHECK(wall.force_free());
  CHECK(classify_boundary(wall, g).characteristic.size() == 2);
}

TEST_CASE("boundary validation rejects a density below the floor") {
  const Grid g = build_grid(1, {1.0, 1.0}, {8, 1});
  auto bd = wall_boundary(g);
  bd.rho_floor = 2.0;
  CHECK_THROWS_AS(validate_boundary(bd, g), PreconditionError);
}

TEST_CASE("totals and distances") {
  const Grid g = build_grid(1, {2.0, 1.0}, {4, 1});
  FieldState s(4);
  s.rho = {1, 2, 3, 4};
  for (auto& m : s.mom) m = {1.0, 0.0};
  CHECK(total_mass(s, g) == doctest::Approx(5.0));
  CHECK(total_momentum(s, g)[0] == doctest::Approx(2.0));
  CHECK(l2_distance(s, s, g) == 0.0);
  const auto e = total_energy(s, wall_boundary(g), g, EosParams{});
  REQUIRE(e.has_value());
  CHECK(*e > 0.0);
}
