#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "snlab/error.hpp"

namespace snlab {

using cplx = std::complex<double>;

/// Uniform 1D lattice symmetric about the origin: x_k = x_min + k dx with
/// x_min = -(n/2) dx. Periodic in the spectral sense, so k -> n - k (mod n)
/// is the parity map x -> -x.
class Grid {
 public:
  Grid() = default;

  std::size_t size() const { return n_; }
  double dx() const { return dx_; }
  double x_min() const { return x_min_; }
  double half_length() const { return -x_min_; }
  double x(std::size_t k) const { return x_min_ + static_cast<double>(k) * dx_; }

  std::vector<double> points() const {
    std::vector<double> xs(n_);
    for (std::size_t k = 0; k < n_; ++k) xs[k] = x(k);
    return xs;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  friend Grid make_grid(std::size_t n_points, double half_length);
  Grid(std::size_t n, double dx) : n_(n), dx_(dx), x_min_(-static_cast<double>(n / 2) * dx) {}

  std::size_t n_ = 0;
  double dx_ = 0.0;
  double x_min_ = 0.0;
};

inline Grid make_grid(std::size_t n_points, double half_length) {
  if (n_points < 2 || !std::has_single_bit(n_points))
    throw ConfigError("grid size must be a power of two >= 2, got " + std::to_string(n_points));
  if (!(half_length > 0.0) || !std::isfinite(half_length))
    throw ConfigError("grid half-length must be positive, got " + std::to_string(half_length));
  return Grid(n_points, 2.0 * half_length / static_cast<double>(n_points));
}

/// Discrete L2 norm squared: sum_k |a_k|^2 dx.
inline double norm_squared(std::span<const cplx> amplitudes, double dx) {
  double s = 0.0;
  for (const auto& a : amplitudes) s += std::norm(a);
  return s * dx;
}

struct WaveFunction {
  Grid grid;
  std::vector<cplx> amplitudes;

  double norm() const { return norm_squared(amplitudes, grid.dx()); }

  /// rho_k = |psi_k|^2
  std::vector<double> density() const {
    std::vector<double> rho(amplitudes.size());
    for (std::size_t k = 0; k < rho.size(); ++k) rho[k] = std::norm(amplitudes[k]);
    return rho;
  }
};

inline void normalize_in_place(WaveFunction& psi) {
  const double s = psi.norm();
  if (!(s > 0.0)) throw UsageError("cannot normalize a zero wavefunction");
  const double f = 1.0 / std::sqrt(s);
  for (auto& a : psi.amplitudes) a *= f;
}

inline WaveFunction normalize(WaveFunction psi) {
  normalize_in_place(psi);
  return psi;
}

/// (2 pi sigma^2)^(-1/4) exp(-x^2 / (4 sigma^2)) on the grid, renormalized.
/// The width must be resolved (sigma >= 4 dx) and fit the domain (sigma <= L/8).
inline WaveFunction sample_gaussian(const Grid& grid, double sigma) {
  if (!(sigma >= 4.0 * grid.dx()) || !(sigma <= grid.half_length() / 8.0))
    throw ResolutionError("gaussian width " + std::to_string(sigma) + " outside [4 dx, L/8] = [" +
                          std::to_string(4.0 * grid.dx()) + ", " +
                          std::to_string(grid.half_length() / 8.0) + "]");
  const double amp = std::pow(2.0 * std::numbers::pi * sigma * sigma, -0.25);
  WaveFunction psi{grid, std::vector<cplx>(grid.size())};
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double x = grid.x(k);
    psi.amplitudes[k] = amp * std::exp(-x * x / (4.0 * sigma * sigma));
  }
  normalize_in_place(psi);
  return psi;
}

}  // namespace snlab
