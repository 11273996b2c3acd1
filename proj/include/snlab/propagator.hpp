#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "snlab/error.hpp"
#include "snlab/fft.hpp"
#include "snlab/grid.hpp"
#include "snlab/kernel.hpp"

namespace snlab {

/// Box potential V(x) = -depth on |x| <= half_width while the trap is on.
struct TrapPotential {
  double depth = 20.0;
  double half_width = 1.0;
  bool active = false;

  double operator()(double x) const {
    return active && std::abs(x) <= half_width ? -depth : 0.0;
  }

  std::vector<double> sample(const Grid& grid) const {
    std::vector<double> v(grid.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = (*this)(grid.x(k));
    return v;
  }

  TrapPotential released() const { return {depth, half_width, false}; }
};

struct StepperConfig {
  double dt = 0.005;
  /// Largest probability tolerated in the outer 5% of the grid.
  double boundary_guard = 1e-6;
  std::size_t snapshot_stride = 20;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> snapshots;
  WaveFunction final_state;
};

/// Strang split-step integrator for i psi_t = -psi_xx / 2 + (V + Phi[|psi|^2]) psi.
///
/// Owns the evolving state together with the combined potential V + Phi of
/// that state, which stays valid across steps: phase factors leave |psi|^2
/// unchanged, so Phi only needs recomputing after each kinetic substep.
class SplitStepper {
 public:
  SplitStepper(WaveFunction psi, const Kernel& kernel, double kappa, const TrapPotential& trap)
      : psi_(std::move(psi)),
        kernel_(kernel),
        kappa_(kappa),
        plan_(FftPlan::get(psi_.grid.size())),
        k_(wavenumbers(psi_.grid.size(), psi_.grid.dx())),
        v_ext_(trap.sample(psi_.grid)),
        potential_(psi_.grid.size()),
        density_(psi_.grid.size()),
        scratch_(2 * psi_.grid.size()) {
    if (!(psi_.grid == kernel.grid())) throw UsageError("wavefunction and kernel grids differ");
    if (!(kappa >= 0.0)) throw ConfigError("kappa must be nonnegative, got " + std::to_string(kappa));
    const double half = 0.95 * psi_.grid.half_length();
    for (std::size_t k = 0; k < psi_.grid.size(); ++k)
      if (std::abs(psi_.grid.x(k)) > half) guard_cells_.push_back(k);
    refresh_potential();
  }

  const WaveFunction& state() const { return psi_; }
  double kappa() const { return kappa_; }
  const Kernel& kernel() const { return kernel_; }

  /// V + Phi evaluated on the current state.
  std::span<const double> potential() const { return potential_; }
  std::span<const double> external_potential() const { return v_ext_; }

  /// One real-time step: half phase, exact kinetic propagation, half phase.
  void step_real(double dt) {
    if (dt != cached_dt_ || cached_imaginary_) {
      kinetic_.resize(k_.size());
      for (std::size_t m = 0; m < k_.size(); ++m)
        kinetic_[m] = std::polar(1.0, -0.5 * k_[m] * k_[m] * dt);
      cached_dt_ = dt;
      cached_imaginary_ = false;
    }
    apply_phase(0.5 * dt);
    apply_kinetic();
    refresh_potential();
    apply_phase(0.5 * dt);
  }

  /// One imaginary-time step (dt -> -i dtau) followed by renormalization.
  void step_imaginary(double dtau) {
    if (dtau != cached_dt_ || !cached_imaginary_) {
      kinetic_.resize(k_.size());
      for (std::size_t m = 0; m < k_.size(); ++m)
        kinetic_[m] = std::exp(-0.5 * k_[m] * k_[m] * dtau);
      cached_dt_ = dtau;
      cached_imaginary_ = true;
    }
    apply_decay(0.5 * dtau);
    apply_kinetic();
    // Phi is a functional of the normalized density.
    renormalize();
    refresh_potential();
    apply_decay(0.5 * dtau);
    renormalize();
    refresh_potential();
  }

  /// Probability in |x| > 0.95 L.
  double guard_probability() const {
    double s = 0.0;
    for (std::size_t k : guard_cells_) s += std::norm(psi_.amplitudes[k]);
    return s * psi_.grid.dx();
  }

  /// 1/2 int |psi'|^2 dx from the spectral derivative.
  double kinetic_energy() {
    std::copy(psi_.amplitudes.begin(), psi_.amplitudes.end(), scratch_.begin());
    const std::span<cplx> buf(scratch_.data(), psi_.amplitudes.size());
    plan_->forward(buf);
    double s = 0.0;
    for (std::size_t m = 0; m < buf.size(); ++m) s += k_[m] * k_[m] * std::norm(buf[m]);
    return 0.5 * s * psi_.grid.dx() / static_cast<double>(buf.size());
  }

  /// (1/2) int Phi rho dx, with Phi the regularized self-potential.
  double interaction_energy() const {
    double s = 0.0;
    for (std::size_t k = 0; k < density_.size(); ++k)
      s += (potential_[k] - v_ext_[k]) * density_[k];
    return 0.5 * s * psi_.grid.dx();
  }

  double external_energy() const {
    double s = 0.0;
    for (std::size_t k = 0; k < density_.size(); ++k) s += v_ext_[k] * density_[k];
    return s * psi_.grid.dx();
  }

  double total_energy() { return kinetic_energy() + interaction_energy() + external_energy(); }

 private:
  void apply_phase(double tau) {
    for (std::size_t k = 0; k < potential_.size(); ++k)
      psi_.amplitudes[k] *= std::polar(1.0, -potential_[k] * tau);
  }

  void apply_decay(double tau) {
    for (std::size_t k = 0; k < potential_.size(); ++k)
      psi_.amplitudes[k] *= std::exp(-potential_[k] * tau);
  }

  void renormalize() {
    const double amp = 1.0 / std::sqrt(psi_.norm());
    for (auto& a : psi_.amplitudes) a *= amp;
  }

  void apply_kinetic() {
    const std::span<cplx> a(psi_.amplitudes);
    plan_->forward(a);
    const double inv_n = 1.0 / static_cast<double>(a.size());
    for (std::size_t m = 0; m < a.size(); ++m) a[m] *= kinetic_[m] * inv_n;
    plan_->backward(a);
  }

  void refresh_potential() {
    for (std::size_t k = 0; k < density_.size(); ++k) density_[k] = std::norm(psi_.amplitudes[k]);
    if (kappa_ == 0.0) {
      potential_ = v_ext_;
      return;
    }
    kernel_.potential_into(density_, kappa_, potential_, scratch_);
    for (std::size_t k = 0; k < potential_.size(); ++k) potential_[k] += v_ext_[k];
  }

  WaveFunction psi_;
  Kernel kernel_;
  double kappa_;
  std::shared_ptr<const FftPlan> plan_;
  std::vector<double> k_;
  std::vector<double> v_ext_;
  std::vector<double> potential_;
  std::vector<double> density_;
  std::vector<cplx> scratch_;
  std::vector<cplx> kinetic_;
  std::vector<std::size_t> guard_cells_;
  double cached_dt_ = std::numeric_limits<double>::quiet_NaN();
  bool cached_imaginary_ = false;
};

/// Single Strang step from a fresh stepper. Prefer SplitStepper for loops.
inline WaveFunction step_real(const WaveFunction& psi, double dt, double kappa, const Kernel& kernel,
                              const TrapPotential& trap, double boundary_guard = 1.0) {
  SplitStepper stepper(psi, kernel, kappa, trap);
  stepper.step_real(dt);
  if (const double g = stepper.guard_probability(); g > boundary_guard)
    throw BoundaryOverflowError(dt, g);
  return stepper.state();
}

/// Called at every snapshot with the current time and state.
using SnapshotObserver = std::function<void(double t, const WaveFunction& psi)>;

inline std::size_t step_count(double t_end, double dt) {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive, got " + std::to_string(dt));
  if (!(t_end >= 0.0)) throw ConfigError("evolution time must be nonnegative");
  const double ratio = t_end / dt;
  const double steps = std::round(ratio);
  if (std::abs(ratio - steps) > 1e-6 * std::max(1.0, ratio))
    throw ConfigError("evolution time " + std::to_string(t_end) +
                      " is not an integer multiple of dt = " + std::to_string(dt));
  return static_cast<std::size_t>(steps);
}

/// Repeated Strang steps up to t_end. Snapshots are taken at t = 0, every
/// snapshot_stride steps, and at t_end.
inline Trajectory evolve(const WaveFunction& psi0, double t_end, const StepperConfig& config,
                         double kappa, const Kernel& kernel, const TrapPotential& trap,
                         const SnapshotObserver& observer = {}) {
  if (config.snapshot_stride == 0) throw ConfigError("snapshot_stride must be positive");
  if (!(config.boundary_guard > 0.0 && config.boundary_guard < 1.0))
    throw ConfigError("boundary_guard must lie in (0, 1)");
  const std::size_t steps = step_count(t_end, config.dt);

  SplitStepper stepper(psi0, kernel, kappa, trap);
  Trajectory traj;
  auto record = [&](double t) {
    traj.times.push_back(t);
    traj.snapshots.push_back(stepper.state().density());
    if (observer) observer(t, stepper.state());
  };
  record(0.0);
  for (std::size_t s = 1; s <= steps; ++s) {
    stepper.step_real(config.dt);
    const double t = static_cast<double>(s) * config.dt;
    if (const double g = stepper.guard_probability(); g > config.boundary_guard)
      throw BoundaryOverflowError(t, g);
    if (s % config.snapshot_stride == 0 || s == steps) record(t);
  }
  traj.final_state = stepper.state();
  return traj;
}

struct GroundStateConfig {
  /// Initial imaginary time step.
  double dt_tau = 0.01;
  /// Relaxation continues with dt_tau / refine_factor, ... until the step is
  /// <= final_dt_tau. The splitting error of the converged state is O(dtau^2).
  double final_dt_tau = 6.25e-5;
  double refine_factor = 4.0;
  /// Stop a stage when |E_k - E_{k-1}| < tol |E_k|.
  double tol = 1e-13;
  std::size_t max_iterations = 400000;
};

struct GroundState {
  WaveFunction psi;
  double energy = 0.0;
  std::size_t iterations = 0;
  std::vector<double> energy_history;
};

/// Imaginary-time relaxation to the ground state of the trapped
/// Schrodinger-Newton Hamiltonian, with staged refinement of dtau.
inline GroundState ground_state(const Grid& grid, double kappa, const Kernel& kernel,
                                const TrapPotential& trap, const GroundStateConfig& config = {}) {
  if (!trap.active) throw ConfigError("ground state requires an active trap");
  if (!(trap.depth > 0.0) || !(trap.half_width > 0.0))
    throw ConfigError("trap depth and half-width must be positive");
  if (!(config.dt_tau > 0.0) || !(config.tol > 0.0) || !(config.final_dt_tau > 0.0) ||
      !(config.refine_factor > 1.0))
    throw ConfigError("invalid ground-state configuration");

  // Even initial guess roughly the size of the trap.
  const double width = std::max(trap.half_width / 2.0, 2.0 * grid.dx());
  WaveFunction guess{grid, std::vector<cplx>(grid.size())};
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double x = grid.x(k);
    guess.amplitudes[k] = std::exp(-x * x / (4.0 * width * width));
  }
  normalize_in_place(guess);

  SplitStepper stepper(std::move(guess), kernel, kappa, trap);
  GroundState result;
  double energy = stepper.total_energy();
  result.energy_history.push_back(energy);
  double delta = std::numeric_limits<double>::infinity();
  double dtau = config.dt_tau;
  for (;;) {
    for (;;) {
      if (result.iterations >= config.max_iterations)
        throw ConvergenceError("ground state did not converge in " +
                                   std::to_string(config.max_iterations) +
                                   " iterations (last energy change " + std::to_string(delta) + ")",
                               delta);
      stepper.step_imaginary(dtau);
      ++result.iterations;
      const double next = stepper.total_energy();
      delta = std::abs(next - energy);
      energy = next;
      result.energy_history.push_back(energy);
      if (delta < config.tol * std::abs(energy)) break;
    }
    if (dtau <= config.final_dt_tau) break;
    dtau = std::max(dtau / config.refine_factor, config.final_dt_tau);
  }
  result.psi = stepper.state();
  result.energy = energy;
  return result;
}

}  // namespace snlab
