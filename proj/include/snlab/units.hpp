#pragma once

#include <cmath>
#include <string>

#include "snlab/error.hpp"

namespace snlab::units {

// CODATA 2018
inline constexpr double G = 6.67430e-11;            // m^3 kg^-1 s^-2
inline constexpr double hbar = 1.054571817e-34;     // J s
inline constexpr double dalton = 1.66053906660e-27; // kg

struct PhysicalParams {
  double mass;          // kg
  double length_scale;  // m
};

inline void validate(const PhysicalParams& p) {
  if (!(p.mass > 0.0)) throw ConfigError("mass must be positive, got " + std::to_string(p.mass));
  if (!(p.length_scale > 0.0))
    throw ConfigError("length scale must be positive, got " + std::to_string(p.length_scale));
}

/// Dimensionless self-coupling kappa = G m^3 l0 / hbar^2.
inline double kappa_from_physical(const PhysicalParams& p) {
  validate(p);
  return G * p.mass * p.mass * p.mass * p.length_scale / (hbar * hbar);
}

/// Time unit t0 = m l0^2 / hbar, in seconds.
inline double t0_from_physical(const PhysicalParams& p) {
  validate(p);
  return p.mass * p.length_scale * p.length_scale / hbar;
}

/// Length scale l0 for which a particle of N daltons has kappa = prefactor * N^3.
///
/// The rule of thumb kappa ~ 2e-36 N^3 (kappa ~ 1e-23 at N = 2.5e4,
/// kappa ~ 1 near N = 1e12) fixes l0 = prefactor hbar^2 / (G m_u^3), about
/// 7.3e-14 m for the default prefactor.
inline double length_scale_for_dalton_prefactor(double prefactor = 2e-36) {
  if (!(prefactor > 0.0)) throw ConfigError("prefactor must be positive");
  return prefactor * hbar * hbar / (G * dalton * dalton * dalton);
}

}  // namespace snlab::units
