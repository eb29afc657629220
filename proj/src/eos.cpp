#include "statns/eos.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "statns/error.hpp"

namespace statns {

void EosParams::validate() const {
  if (!(a > 0.0) || !(gamma > 1.0)) {
    throw DomainError("EOS requires a > 0 and gamma > 1 (got a=" + std::to_string(a) +
                      ", gamma=" + std::to_string(gamma) + ")");
  }
}

namespace {

void require_nonnegative(double rho, const char* what) {
  if (!(rho >= 0.0)) throw DomainError(std::string(what) + ": negative density");
}

}  // namespace

double pressure(double rho, const EosParams& eos) {
  require_nonnegative(rho, "pressure");
  return eos.a * std::pow(rho, eos.gamma);
}

double pressure_derivative(double rho, const EosParams& eos) {
  require_nonnegative(rho, "pressure_derivative");
  return eos.a * eos.gamma * std::pow(rho, eos.gamma - 1.0);
}

double sound_speed(double rho, const EosParams& eos) {
  return std::sqrt(pressure_derivative(std::max(rho, 0.0), eos));
}

double pressure_potential(double rho, const EosParams& eos) {
  require_nonnegative(rho, "pressure_potential");
  return eos.a * std::pow(rho, eos.gamma) / (eos.gamma - 1.0);
}

double pressure_potential_derivative(double rho, const EosParams& eos) {
  require_nonnegative(rho, "pressure_potential_derivative");
  return eos.a * eos.gamma * std::pow(rho, eos.gamma - 1.0) / (eos.gamma - 1.0);
}

EnergyValue energy_density(double rho, const Vec2& m, const Vec2& u_ref, const EosParams& eos) {
  if (rho < 0.0 || std::isnan(rho)) return EnergyValue::infinite();
  if (rho < kVacuumDensity) {
    if (m[0] != 0.0 || m[1] != 0.0) return EnergyValue::infinite();
    // P(rho) for rho below the vacuum threshold is below 1e-16 for every admissible gamma.
    return {pressure_potential(rho, eos), true};
  }
  const Vec2 rel{m[0] / rho - u_ref[0], m[1] / rho - u_ref[1]};
  return {0.5 * rho * norm2(rel) + pressure_potential(rho, eos), true};
}

EnergyValue relative_energy_density(double rho, const Vec2& m, double rho_t, const Vec2& m_t,
                                    const EosParams& eos) {
  if (!(rho_t > 0.0)) {
    throw DomainError("relative_energy_density: reference density must be positive");
  }
  if (rho < 0.0 || std::isnan(rho)) return EnergyValue::infinite();
  const double bregman_pot = pressure_potential(rho, eos) -
                             pressure_potential_derivative(rho_t, eos) * (rho - rho_t) -
                             pressure_potential(rho_t, eos);
  const Vec2 u_t{m_t[0] / rho_t, m_t[1] / rho_t};
  double kinetic = 0.0;
  if (rho < kVacuumDensity) {
    if (m[0] != 0.0 || m[1] != 0.0) return EnergyValue::infinite();
  } else {
    const Vec2 rel{m[0] / rho - u_t[0], m[1] / rho - u_t[1]};
    kinetic = 0.5 * rho * norm2(rel);
  }
  // Rounding can push the potential part a few ulps below zero near the base point.
  return {kinetic + std::max(bregman_pot, 0.0), true};
}

namespace {

double potential_bregman(double rho, double rho_t, const EosParams& eos) {
  return pressure_potential(rho, eos) - pressure_potential_derivative(rho_t, eos) * (rho - rho_t) -
         pressure_potential(rho_t, eos);
}

// Worst case over the speed offset s = |u - u_t| >= 0 with the offset aligned to u_t, |u_t| = r.
// `denominator(s)` gives the quadratic (or far-field) weight at that offset.
template <class Denominator>
double min_over_speed(double rho, double bregman, Denominator&& denominator) {
  constexpr int kSamples = 64;
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < kSamples; ++k) {
    // theta in [0, pi/2) maps to s in [0, inf).
    const double theta = (static_cast<double>(k) / kSamples) * (M_PI / 2.0);
    const double s = std::tan(theta);
    const double num = 0.5 * rho * s * s + bregman;
    best = std::min(best, num / denominator(s));
  }
  return best;
}

}  // namespace

double quadratic_lower_bound_constant(double r, const EosParams& eos) {
  if (!(r > 1.0)) throw DomainError("quadratic_lower_bound_constant: r must exceed 1");
  eos.validate();
  constexpr int kSamples = 64;
  const double rho_lo = 0.5 / r, rho_hi = 2.0 * r;
  const double ref_lo = 1.0 / r, ref_hi = r;
  double best = std::numeric_limits<double>::infinity();

  // Band branch: rho in [1/(2r), 2r], rho_t in [1/r, r], |u_t| <= r.
  for (int i = 0; i < kSamples; ++i) {
    const double rho = rho_lo + (rho_hi - rho_lo) * (i + 0.5) / kSamples;
    for (int j = 0; j < kSamples; ++j) {
      const double rho_t = ref_lo + (ref_hi - ref_lo) * j / (kSamples - 1.0);
      const double drho = rho - rho_t;
      const double breg = potential_bregman(rho, rho_t, eos);
      // Large speed offsets approach the kinetic ratio 1/(2 rho).
      best = std::min(best, 0.5 / rho);
      if (std::abs(drho) < 1e-9) continue;
      best = std::min(best, min_over_speed(rho, breg, [&](double s) {
                        const double dm = rho * s + std::abs(drho) * r;
                        return drho * drho + dm * dm;
                      }));
    }
  }

  // Far branch: rho outside the band, compared with 1 + rho^gamma + |m|^2 / rho.
  for (int i = 0; i < kSamples; ++i) {
    const double t = (i + 0.5) / kSamples;
    const double rho = (i < kSamples / 2) ? rho_lo * 2.0 * t
                                          : rho_hi * std::pow(1e3, 2.0 * t - 1.0);
    for (int j = 0; j < kSamples; ++j) {
      const double rho_t = ref_lo + (ref_hi - ref_lo) * j / (kSamples - 1.0);
      const double breg = potential_bregman(rho, rho_t, eos);
      best = std::min(best, min_over_speed(rho, breg, [&](double s) {
                        return 1.0 + std::pow(rho, eos.gamma) + rho * (r + s) * (r + s);
                      }));
    }
  }
  // The sampled minimum over-estimates the infimum; halve it to cover the gaps between samples.
  return 0.5 * best;
}

}  // namespace statns
