#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "snlab/error.hpp"
#include "snlab/fft.hpp"
#include "snlab/grid.hpp"

namespace snlab {

/// Short-distance cure for the 1/|r| interaction.
enum class KernelMode {
  plummer,  ///< 1 / sqrt(r^2 + a^2)
  floor,    ///< 1 / max(|r|, a)
};

inline std::string_view to_string(KernelMode mode) {
  return mode == KernelMode::plummer ? "plummer" : "floor";
}

inline KernelMode kernel_mode_from_string(std::string_view s) {
  if (s == "plummer") return KernelMode::plummer;
  if (s == "floor") return KernelMode::floor;
  throw ConfigError("unknown kernel mode '" + std::string(s) + "' (expected plummer or floor)");
}

/// Regularized 1/|r| kernel with its transform on a 2n zero-padded domain, so
/// that convolutions with densities on the grid are linear rather than
/// circular.
class Kernel {
 public:
  const Grid& grid() const { return grid_; }
  double reg_length() const { return a_; }
  KernelMode mode() const { return mode_; }

  double operator()(double r) const {
    if (mode_ == KernelMode::plummer) return 1.0 / std::sqrt(r * r + a_ * a_);
    return 1.0 / std::max(std::abs(r), a_);
  }

  std::span<const cplx> spectral_table() const { return table_; }

  /// out_i = -kappa dx sum_j K(x_i - x_j) rho_j. `scratch` must hold 2n values.
  void potential_into(std::span<const double> rho, double kappa, std::span<double> out,
                      std::span<cplx> scratch) const {
    const std::size_t n = grid_.size();
    std::fill(scratch.begin(), scratch.end(), cplx{});
    std::copy(rho.begin(), rho.end(), scratch.begin());
    plan_->forward(scratch);
    for (std::size_t m = 0; m < 2 * n; ++m) scratch[m] *= table_[m];
    plan_->backward(scratch);
    const double f = -kappa * grid_.dx() / static_cast<double>(2 * n);
    for (std::size_t i = 0; i < n; ++i) out[i] = f * scratch[i].real();
  }

 private:
  friend Kernel build_kernel(const Grid& grid, double a, KernelMode mode);

  Kernel(const Grid& grid, double a, KernelMode mode)
      : grid_(grid), a_(a), mode_(mode), plan_(FftPlan::get(2 * grid.size())) {
    const std::size_t n = grid.size();
    table_.assign(2 * n, cplx{});
    for (std::size_t m = 0; m <= n; ++m) table_[m] = (*this)(static_cast<double>(m) * grid.dx());
    for (std::size_t m = 1; m < n; ++m) table_[2 * n - m] = table_[m];
    plan_->forward(table_);
  }

  Grid grid_;
  double a_;
  KernelMode mode_;
  std::shared_ptr<const FftPlan> plan_;
  std::vector<cplx> table_;
};

inline Kernel build_kernel(const Grid& grid, double a, KernelMode mode = KernelMode::plummer) {
  if (!(a >= grid.dx() / 4.0) || !std::isfinite(a))
    throw ConfigError("kernel regularization length " + std::to_string(a) +
                      " below dx/4 = " + std::to_string(grid.dx() / 4.0));
  return Kernel(grid, a, mode);
}

/// Gravitational self-potential Phi[rho](x) = -kappa * int K(x - y) rho(y) dy.
inline std::vector<double> self_potential(const Grid& grid, std::span<const double> density,
                                          const Kernel& kernel, double kappa) {
  if (!(grid == kernel.grid()) || density.size() != grid.size())
    throw UsageError("density and kernel live on different grids");
  if (!(kappa >= 0.0)) throw ConfigError("kappa must be nonnegative, got " + std::to_string(kappa));
  double mass = 0.0;
  for (double r : density) mass += r;
  if (mass * grid.dx() > 1.0 + 1e-6)
    throw UsageError("density integrates to " + std::to_string(mass * grid.dx()) + " > 1");
  std::vector<double> phi(grid.size());
  std::vector<cplx> scratch(2 * grid.size());
  kernel.potential_into(density, kappa, phi, scratch);
  return phi;
}

}  // namespace snlab
