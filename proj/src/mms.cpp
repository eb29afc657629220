#include "statns/mms.hpp"

#include <cmath>

namespace statns {

double MmsProblem::density(double t, double x) { return 2.0 + 0.1 * std::sin(2.0 * M_PI * (x - t)); }

double MmsProblem::density_x(double t, double x) {
  return 0.2 * M_PI * std::cos(2.0 * M_PI * (x - t));
}

BoundaryData MmsProblem::boundary(const Grid& grid) const {
  const EosParams e = eos;
  return boundary_from_functions(
      grid, [](Vec2 x) { return density(0.0, x[0]); }, [](Vec2) { return Vec2{1.0, 0.0}; },
      [e](Vec2 x) {
        const double r = density(0.0, x[0]);
        return Vec2{e.a * e.gamma * std::pow(r, e.gamma - 2.0) * density_x(0.0, x[0]), 0.0};
      },
      nullptr, 1.5);
}

std::shared_ptr<const Forcing> MmsProblem::forcing() const {
  auto f = std::make_shared<Forcing>();
  const EosParams e = eos;
  f->force = [e](double t, Vec2 x) {
    const double r = density(t, x[0]);
    return Vec2{e.a * e.gamma * std::pow(r, e.gamma - 2.0) * density_x(t, x[0]), 0.0};
  };
  f->inflow_density = [](double t, Vec2 x) { return density(t, x[0]); };
  return f;
}

FieldState MmsProblem::exact(const Grid& grid, double t) const {
  FieldState s(grid.cell_count());
  for (std::size_t c = 0; c < s.size(); ++c) {
    const double r = density(t, grid.cell_center(c)[0]);
    s.rho[c] = r;
    s.mom[c] = {r, 0.0};
  }
  return s;
}

double MmsProblem::l1_error(const FieldState& state, const Grid& grid, double t) const {
  double err = 0.0;
  for (std::size_t c = 0; c < state.size(); ++c) {
    err += std::abs(state.rho[c] - density(t, grid.cell_center(c)[0]));
  }
  return err * grid.cell_volume();
}

}  // namespace statns
