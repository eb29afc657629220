#pragma once

#include <array>

namespace statns {

using Vec2 = std::array<double, 2>;

inline double dot(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }
inline double norm2(const Vec2& a) { return dot(a, a); }

/// Isentropic power law p(rho) = a * rho^gamma.
struct EosParams {
  double a = 1.0;
  double gamma = 1.4;

  /// Throws DomainError unless a > 0 and gamma > 1.
  void validate() const;
};

/// Extended-real energy density. `finite == false` encodes +infinity.
struct EnergyValue {
  double value = 0.0;
  bool finite = true;

  static EnergyValue infinite() { return {0.0, false}; }
};

/// Densities below this are treated as vacuum when deciding whether m = 0.
inline constexpr double kVacuumDensity = 1e-12;

double pressure(double rho, const EosParams& eos);
/// dp/drho.
double pressure_derivative(double rho, const EosParams& eos);
double sound_speed(double rho, const EosParams& eos);

/// P(rho) = a rho^gamma / (gamma - 1), the solution of P'(rho) rho - P(rho) = p(rho) with P(0) = 0.
double pressure_potential(double rho, const EosParams& eos);
double pressure_potential_derivative(double rho, const EosParams& eos);

/// E(rho, m | u_ref) = 1/2 rho |m/rho - u_ref|^2 + P(rho), with the convex l.s.c. extension
/// E = 0 at (0, 0) and E = +inf for rho < 0 or (rho = 0, m != 0).
EnergyValue energy_density(double rho, const Vec2& m, const Vec2& u_ref, const EosParams& eos);

/// E(rho, m) without reference velocity; the convex functional whose Bregman divergence is the
/// relative energy.
inline EnergyValue energy_density(double rho, const Vec2& m, const EosParams& eos) {
  return energy_density(rho, m, Vec2{0.0, 0.0}, eos);
}

/// Relative energy E(rho, m | rho_t, m_t)
///   = 1/2 rho |m/rho - m_t/rho_t|^2 + P(rho) - P'(rho_t)(rho - rho_t) - P(rho_t).
/// The reference density must be strictly positive.
EnergyValue relative_energy_density(double rho, const Vec2& m, double rho_t, const Vec2& m_t,
                                    const EosParams& eos);

/// Constant c(r) > 0 with E(x|x_t) >= c(r)(|rho - rho_t|^2 + |m - m_t|^2) on the band
/// rho in [1/(2r), 2r], rho_t in [1/r, r], obtained by minimizing the ratio over a
/// deterministic 64^3 sample of (rho, rho_t, momentum offset) with the worst-case momentum
/// direction handled analytically. The momentum reference is sampled on |m_t| <= r * rho_t.
double quadratic_lower_bound_constant(double r, const EosParams& eos);

}  // namespace statns
