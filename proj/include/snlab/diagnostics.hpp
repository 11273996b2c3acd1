#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "snlab/error.hpp"
#include "snlab/grid.hpp"
#include "snlab/kernel.hpp"
#include "snlab/propagator.hpp"

namespace snlab {

/// Probability in [a, b] with grid cell k covering [x_k - dx/2, x_k + dx/2].
/// A cell cut by an endpoint contributes the covered fraction of its mass, so
/// the result is continuous in a and b.
inline double interval_probability(const Grid& grid, std::span<const double> rho, double a, double b) {
  if (rho.size() != grid.size()) throw UsageError("density size does not match grid");
  const double dx = grid.dx();
  const double lo_edge = grid.x_min() - 0.5 * dx;
  const double hi_edge = grid.x(grid.size() - 1) + 0.5 * dx;
  if (a < lo_edge - 1e-12 * dx || b > hi_edge + 1e-12 * dx)
    throw DomainError("interval [" + std::to_string(a) + ", " + std::to_string(b) +
                      "] exceeds the grid extent [" + std::to_string(lo_edge) + ", " +
                      std::to_string(hi_edge) + "]");
  if (b <= a) return 0.0;
  // Cell index containing a point, measured from the lower edge.
  const auto cell_of = [&](double x) {
    const double u = (x - lo_edge) / dx;
    return std::clamp(static_cast<std::ptrdiff_t>(std::floor(u)), std::ptrdiff_t{0},
                      static_cast<std::ptrdiff_t>(grid.size()) - 1);
  };
  const std::ptrdiff_t first = cell_of(a);
  const std::ptrdiff_t last = cell_of(b);
  double s = 0.0;
  for (std::ptrdiff_t k = first; k <= last; ++k) {
    const double c_lo = lo_edge + static_cast<double>(k) * dx;
    const double covered = std::min(c_lo + dx, b) - std::max(c_lo, a);
    if (covered > 0.0) s += rho[static_cast<std::size_t>(k)] * covered;
  }
  return s;
}

/// Raw leak P_0([-R, R]) - P_t([-R - ct, R + ct]); may be negative.
inline double cone_leak_raw(const Grid& grid, std::span<const double> rho0, std::span<const double> rho_t,
                            double t, double R, double c = 1.0) {
  if (!(t >= 0.0)) throw UsageError("cone_leak needs t >= 0");
  if (!(R > 0.0)) throw UsageError("cone_leak needs R > 0");
  const double reach = R + c * t;
  const double edge = grid.half_length() - 0.5 * grid.dx();
  if (reach > edge)
    throw DomainError("light-cone interval half-width " + std::to_string(reach) +
                      " beyond grid extent " + std::to_string(edge));
  return interval_probability(grid, rho0, -R, R) - interval_probability(grid, rho_t, -reach, reach);
}

/// Probability that left the future light cone of [-R, R] by time t, clamped at 0.
inline double cone_leak(const Grid& grid, std::span<const double> rho0, std::span<const double> rho_t,
                        double t, double R, double c = 1.0) {
  return std::max(0.0, cone_leak_raw(grid, rho0, rho_t, t, R, c));
}

inline double max_leak(std::span<const double> leaks) {
  if (leaks.empty()) throw UsageError("max_leak of an empty series");
  return *std::max_element(leaks.begin(), leaks.end());
}

/// Standard deviation of the position distribution.
inline double spread(const Grid& grid, std::span<const double> rho) {
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k < rho.size(); ++k) {
    const double x = grid.x(k);
    m0 += rho[k];
    m1 += x * rho[k];
    m2 += x * x * rho[k];
  }
  m1 /= m0;
  m2 /= m0;
  return std::sqrt(std::max(0.0, m2 - m1 * m1));
}

inline double spread(const WaveFunction& psi) { return spread(psi.grid, psi.density()); }

/// Position of the q-quantile of the piecewise-uniform cell distribution.
inline double quantile(const Grid& grid, std::span<const double> rho, double q) {
  double total = 0.0;
  for (double r : rho) total += r;
  const double target = q * total;
  double acc = 0.0;
  const double lo_edge = grid.x_min() - 0.5 * grid.dx();
  for (std::size_t k = 0; k < rho.size(); ++k) {
    if (acc + rho[k] >= target && rho[k] > 0.0)
      return lo_edge + grid.dx() * (static_cast<double>(k) + (target - acc) / rho[k]);
    acc += rho[k];
  }
  return lo_edge + grid.dx() * static_cast<double>(rho.size());
}

/// Interquartile width: robust measure of the size of the wavepacket core,
/// insensitive to small amounts of probability ejected far away.
inline double core_width(const Grid& grid, std::span<const double> rho) {
  return quantile(grid, rho, 0.75) - quantile(grid, rho, 0.25);
}

/// 1 - P([-R, R]).
inline double tail_probability(const Grid& grid, std::span<const double> rho, double R) {
  if (!(R > 0.0)) throw UsageError("tail_probability needs R > 0");
  double total = 0.0;
  for (double r : rho) total += r;
  return std::max(0.0, total * grid.dx() - interval_probability(grid, rho, -R, R));
}

struct Energies {
  double kinetic = 0.0;      ///< 1/2 int |psi'|^2
  double interaction = 0.0;  ///< 1/2 int Phi[rho] rho, always <= 0
  double ratio() const { return interaction / kinetic; }
};

inline Energies energies(const WaveFunction& psi, double kappa, const Kernel& kernel) {
  SplitStepper probe(psi, kernel, kappa, TrapPotential{});
  return {probe.kinetic_energy(), probe.interaction_energy()};
}

/// Time-indexed scalar diagnostics for one leak radius R.
struct DiagnosticsSeries {
  double R = 0.0;
  std::vector<double> times;
  std::vector<double> norm;
  std::vector<double> spread;
  std::vector<double> M;
  std::vector<double> M_raw;
  std::vector<double> E_kin;
  std::vector<double> E_int;

  std::size_t size() const { return times.size(); }
  double max_leak() const { return M.empty() ? 0.0 : snlab::max_leak(M); }
};

}  // namespace snlab
