#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "snlab/diagnostics.hpp"
#include "snlab/error.hpp"
#include "snlab/grid.hpp"
#include "snlab/kernel.hpp"
#include "snlab/parallel.hpp"
#include "snlab/propagator.hpp"

namespace snlab {

/// Numerical setup shared by all scenarios.
struct SolverConfig {
  std::size_t n = 4096;
  double L = 200.0;
  StepperConfig stepper;
  /// Guard used once a trap is released. The box edge leaves a power-law
  /// momentum tail, so some probability always reaches the domain edge.
  double release_boundary_guard = 1e-3;
  KernelMode kernel_mode = KernelMode::plummer;
  /// Kernel regularization length; 0 selects the grid spacing.
  double kernel_a = 0.0;
  GroundStateConfig ground;
  double c = 1.0;

  Grid grid() const { return make_grid(n, L); }
  double resolved_kernel_a() const { return kernel_a > 0.0 ? kernel_a : grid().dx(); }
  Kernel kernel() const { return build_kernel(grid(), resolved_kernel_a(), kernel_mode); }
};

/// Diagnostics recorded at every snapshot of an evolution.
class SeriesRecorder {
 public:
  SeriesRecorder(const Grid& grid, std::span<const double> rho0, std::vector<double> radii, double kappa,
                 const Kernel& kernel, double c, bool with_energies = true)
      : grid_(grid), rho0_(rho0.begin(), rho0.end()), kappa_(kappa), kernel_(kernel), c_(c),
        with_energies_(with_energies) {
    for (double R : radii) {
      DiagnosticsSeries s;
      s.R = R;
      series_.push_back(std::move(s));
    }
  }

  void operator()(double t, const WaveFunction& psi) {
    const auto rho = psi.density();
    const double norm = psi.norm();
    const double width = spread(grid_, rho);
    core_.push_back(core_width(grid_, rho));
    Energies e;
    if (with_energies_) e = energies(psi, kappa_, kernel_);
    for (auto& s : series_) {
      const double raw = cone_leak_raw(grid_, rho0_, rho, t, s.R, c_);
      s.times.push_back(t);
      s.norm.push_back(norm);
      s.spread.push_back(width);
      s.M_raw.push_back(raw);
      s.M.push_back(std::max(0.0, raw));
      s.E_kin.push_back(e.kinetic);
      s.E_int.push_back(e.interaction);
    }
  }

  std::vector<DiagnosticsSeries>& series() { return series_; }
  std::vector<double>& core_widths() { return core_; }

 private:
  Grid grid_;
  std::vector<double> rho0_;
  double kappa_;
  const Kernel& kernel_;
  double c_;
  bool with_energies_;
  std::vector<DiagnosticsSeries> series_;
  std::vector<double> core_;
};

inline void check_cone_fits(const SolverConfig& solver, std::span<const double> radii, double t_max) {
  const Grid grid = solver.grid();
  for (double R : radii) {
    if (!(R > 0.0)) throw ConfigError("R must be positive, got " + std::to_string(R));
    if (R + solver.c * t_max > grid.half_length() - 0.5 * grid.dx())
      throw ConfigError("light cone of R = " + std::to_string(R) + " at t_max = " + std::to_string(t_max) +
                        " leaves the grid (L = " + std::to_string(grid.half_length()) + ")");
  }
}

struct GaussianRun {
  Trajectory trajectory;
  std::vector<DiagnosticsSeries> series;  ///< one per R
  std::vector<double> core_width;         ///< interquartile width per snapshot
};

/// Free release of the Gaussian packet of width sigma under self-coupling kappa.
inline GaussianRun run_gaussian(double sigma, double kappa, std::vector<double> radii, double t_max,
                                const SolverConfig& solver, bool with_energies = true) {
  check_cone_fits(solver, radii, t_max);
  const Grid grid = solver.grid();
  const Kernel kernel = solver.kernel();
  const WaveFunction psi0 = sample_gaussian(grid, sigma);
  const auto rho0 = psi0.density();
  SeriesRecorder recorder(grid, rho0, std::move(radii), kappa, kernel, solver.c, with_energies);
  GaussianRun run;
  run.trajectory = evolve(psi0, t_max, solver.stepper, kappa, kernel, TrapPotential{},
                          [&](double t, const WaveFunction& psi) { recorder(t, psi); });
  run.series = std::move(recorder.series());
  run.core_width = std::move(recorder.core_widths());
  return run;
}

enum class LocalizationCriterion {
  /// Core (interquartile) width never exceeds its initial value on [0, t_max].
  core_width,
  /// Delta_x(t_max) <= Delta_x(0).
  spread,
};

inline std::string_view to_string(LocalizationCriterion c) {
  return c == LocalizationCriterion::core_width ? "core_width" : "spread";
}

inline LocalizationCriterion localization_criterion_from_string(std::string_view s) {
  if (s == "core_width") return LocalizationCriterion::core_width;
  if (s == "spread") return LocalizationCriterion::spread;
  throw ConfigError("unknown localization criterion '" + std::string(s) + "'");
}

inline bool is_localized(double sigma, double kappa, double t_max, const SolverConfig& solver,
                         LocalizationCriterion criterion) {
  const GaussianRun run = run_gaussian(sigma, kappa, {}, t_max, solver, false);
  if (criterion == LocalizationCriterion::spread) {
    const Grid grid = solver.grid();
    return spread(grid, run.trajectory.snapshots.back()) <= spread(grid, run.trajectory.snapshots.front());
  }
  const double initial = run.core_width.front();
  return *std::max_element(run.core_width.begin(), run.core_width.end()) <= initial;
}

struct KappaCritical {
  double kappa_c = 0.0;
  std::vector<std::pair<double, bool>> evaluations;  ///< (kappa, localized)
};

/// Bisection for the coupling at which the packet stops spreading.
inline KappaCritical estimate_kappa_c(double sigma, double kappa_lo, double kappa_hi, double t_max,
                                      const SolverConfig& solver,
                                      LocalizationCriterion criterion = LocalizationCriterion::core_width,
                                      double tolerance = 0.02) {
  if (!(kappa_lo >= 0.0) || !(kappa_hi > kappa_lo)) throw ConfigError("invalid kappa bracket");
  KappaCritical out;
  auto localized = [&](double kappa) {
    const bool v = is_localized(sigma, kappa, t_max, solver, criterion);
    out.evaluations.emplace_back(kappa, v);
    return v;
  };
  if (localized(kappa_lo) || !localized(kappa_hi))
    throw BracketError("bracket [" + std::to_string(kappa_lo) + ", " + std::to_string(kappa_hi) +
                       "] does not separate spreading from localization");
  while (kappa_hi - kappa_lo > tolerance) {
    const double mid = 0.5 * (kappa_lo + kappa_hi);
    (localized(mid) ? kappa_hi : kappa_lo) = mid;
  }
  out.kappa_c = 0.5 * (kappa_lo + kappa_hi);
  return out;
}

struct TrapRun {
  GroundState ground;
  Energies energies;
  double delta = 0.0;  ///< E_int / E_kin of the trapped ground state
  Trajectory released;
  DiagnosticsSeries series;  ///< leak of the trap interval [-R, R]
  double M_tilde = 0.0;
  /// max_t ||rho(t) - rho(0)||_inf with the trap kept on.
  std::optional<double> control_drift;
};

/// Trap-release protocol: relax to the ground state of the box of half-width R
/// and depth V0, switch the trap off at t = 0 and record how much probability
/// leaves the light cone of the trap region.
inline TrapRun run_trap(double R, double V0, double kappa, double t_max, const SolverConfig& solver,
                        bool with_control = true, bool keep_snapshots = true) {
  if (!(V0 > 0.0)) throw ConfigError("trap depth must be positive");
  const std::vector<double> radii{R};
  check_cone_fits(solver, radii, t_max);
  const Grid grid = solver.grid();
  const Kernel kernel = solver.kernel();
  const TrapPotential trap{V0, R, true};

  TrapRun run;
  run.ground = ground_state(grid, kappa, kernel, trap, solver.ground);
  run.energies = energies(run.ground.psi, kappa, kernel);
  run.delta = run.energies.ratio();

  const auto rho0 = run.ground.psi.density();
  SeriesRecorder recorder(grid, rho0, radii, kappa, kernel, solver.c);
  StepperConfig release = solver.stepper;
  release.boundary_guard = std::max(release.boundary_guard, solver.release_boundary_guard);
  run.released = evolve(run.ground.psi, t_max, release, kappa, kernel, trap.released(),
                        [&](double t, const WaveFunction& psi) { recorder(t, psi); });
  if (!keep_snapshots) run.released.snapshots = {run.released.snapshots.front(), run.released.snapshots.back()};
  run.series = std::move(recorder.series().front());
  run.M_tilde = run.series.max_leak();

  if (with_control) {
    double drift = 0.0;
    evolve(run.ground.psi, t_max, solver.stepper, kappa, kernel, trap, [&](double, const WaveFunction& psi) {
      const auto rho = psi.density();
      for (std::size_t k = 0; k < rho.size(); ++k) drift = std::max(drift, std::abs(rho[k] - rho0[k]));
    });
    run.control_drift = drift;
  }
  return run;
}

enum class Scenario { gaussian, trap };

inline std::string_view to_string(Scenario s) { return s == Scenario::gaussian ? "gaussian" : "trap"; }

/// kappa grid: step 0.01 on [0, 1], 0.02 on (1, 3], 1 on (3, 4].
inline std::vector<double> default_sweep_kappas() {
  std::vector<double> k;
  for (int i = 0; i <= 100; ++i) k.push_back(i / 100.0);
  for (int i = 1; i <= 100; ++i) k.push_back(1.0 + i / 50.0);
  k.push_back(4.0);
  return k;
}

inline std::vector<double> default_sweep_radii() {
  std::vector<double> r;
  for (int i = 0; i <= 8; ++i) r.push_back(1.0 + i / 2.0);
  return r;
}

struct SweepSpec {
  std::vector<double> R_values = default_sweep_radii();
  std::vector<double> kappa_values = default_sweep_kappas();
  double t_max = 30.0;
  Scenario scenario = Scenario::trap;
  double V0 = 20.0;     ///< trap scenario
  double sigma = 1.0;   ///< gaussian scenario
};

inline void validate(const SweepSpec& spec) {
  auto sorted = [](const std::vector<double>& v) { return std::is_sorted(v.begin(), v.end()); };
  if (!sorted(spec.R_values) || !sorted(spec.kappa_values))
    throw ConfigError("sweep values must be sorted ascending");
  if (!(spec.t_max > 0.0)) throw ConfigError("sweep t_max must be positive");
  for (double k : spec.kappa_values)
    if (!(k >= 0.0)) throw ConfigError("sweep kappa values must be nonnegative");
  for (double r : spec.R_values)
    if (!(r > 0.0)) throw ConfigError("sweep R values must be positive");
}

/// Numerical provenance attached to every sweep cell.
struct RunMetadata {
  std::size_t n = 0;
  double L = 0.0;
  double dt = 0.0;
  double t_max = 0.0;
  std::string kernel_mode;
  double kernel_a = 0.0;
  std::string scenario;
  double V0 = 0.0;
  double sigma = 0.0;
  double final_dt_tau = 0.0;

  std::string canonical() const {
    char buf[512];
    std::snprintf(buf, sizeof buf, "n=%zu;L=%.17g;dt=%.17g;t_max=%.17g;kernel=%s;a=%.17g;scenario=%s;V0=%.17g;"
                  "sigma=%.17g;dtau=%.17g",
                  n, L, dt, t_max, kernel_mode.c_str(), kernel_a, scenario.c_str(), V0, sigma, final_dt_tau);
    return buf;
  }

  /// FNV-1a of the canonical form; stable across platforms.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : canonical()) {
      h ^= ch;
      h *= 1099511628211ull;
    }
    return h;
  }
};

inline RunMetadata metadata_for(const SweepSpec& spec, const SolverConfig& solver) {
  return {solver.n,
          solver.L,
          solver.stepper.dt,
          spec.t_max,
          std::string(to_string(solver.kernel_mode)),
          solver.resolved_kernel_a(),
          std::string(to_string(spec.scenario)),
          spec.scenario == Scenario::trap ? spec.V0 : 0.0,
          spec.scenario == Scenario::gaussian ? spec.sigma : 0.0,
          spec.scenario == Scenario::trap ? solver.ground.final_dt_tau : 0.0};
}

struct SweepCell {
  double kappa = 0.0;
  double R = 0.0;
  double M_tilde = std::numeric_limits<double>::quiet_NaN();
  double delta = std::numeric_limits<double>::quiet_NaN();
  double E_kin = std::numeric_limits<double>::quiet_NaN();
  double E_int = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  std::string error;
  RunMetadata metadata;
};

struct SweepResult {
  RunMetadata metadata;
  std::vector<SweepCell> cells;  ///< sorted by (kappa, R)

  const SweepCell* find(double kappa, double R) const {
    for (const auto& c : cells)
      if (c.kappa == kappa && c.R == R) return &c;
    return nullptr;
  }
};

struct SweepOptions {
  std::size_t workers = 1;
  /// Cells already computed (e.g. loaded from a previous run); never recomputed.
  std::vector<SweepCell> completed;
  /// Invoked once per freshly computed cell, serialized.
  std::function<void(const SweepCell&)> on_cell;
};

/// Scans the (kappa, R) grid. Cells fail independently: an error is recorded
/// in the cell and the sweep carries on.
inline SweepResult sweep(const SweepSpec& spec, const SolverConfig& solver, const SweepOptions& options = {}) {
  validate(spec);
  SweepResult result;
  result.metadata = metadata_for(spec, solver);
  if (spec.R_values.empty() || spec.kappa_values.empty()) return result;
  check_cone_fits(solver, spec.R_values, spec.t_max);

  auto is_done = [&](double kappa, double R) {
    return std::any_of(options.completed.begin(), options.completed.end(),
                       [&](const SweepCell& c) { return c.kappa == kappa && c.R == R; });
  };

  std::mutex mutex;
  std::vector<SweepCell> fresh;
  auto publish = [&](SweepCell cell) {
    std::lock_guard lock(mutex);
    if (options.on_cell) options.on_cell(cell);
    fresh.push_back(std::move(cell));
  };

  // Gaussian cells of one kappa share a single evolution; trap cells are independent.
  struct Task {
    double kappa;
    std::vector<double> radii;
  };
  std::vector<Task> tasks;
  for (double kappa : spec.kappa_values) {
    std::vector<double> pending;
    for (double R : spec.R_values)
      if (!is_done(kappa, R)) pending.push_back(R);
    if (pending.empty()) continue;
    if (spec.scenario == Scenario::gaussian) {
      tasks.push_back({kappa, pending});
    } else {
      for (double R : pending) tasks.push_back({kappa, {R}});
    }
  }

  parallel_for(tasks.size(), options.workers, [&](std::size_t i) {
    const Task& task = tasks[i];
    auto blank = [&](double R) {
      SweepCell c;
      c.kappa = task.kappa;
      c.R = R;
      c.metadata = result.metadata;
      return c;
    };
    try {
      if (spec.scenario == Scenario::gaussian) {
        const GaussianRun run = run_gaussian(spec.sigma, task.kappa, task.radii, spec.t_max, solver, false);
        const Grid grid = solver.grid();
        const Energies e = energies(sample_gaussian(grid, spec.sigma), task.kappa, solver.kernel());
        for (const auto& s : run.series) {
          SweepCell c = blank(s.R);
          c.M_tilde = s.max_leak();
          c.E_kin = e.kinetic;
          c.E_int = e.interaction;
          c.delta = e.ratio();
          c.converged = true;
          publish(std::move(c));
        }
      } else {
        const TrapRun run = run_trap(task.radii.front(), spec.V0, task.kappa, spec.t_max, solver, false, false);
        SweepCell c = blank(task.radii.front());
        c.M_tilde = run.M_tilde;
        c.E_kin = run.energies.kinetic;
        c.E_int = run.energies.interaction;
        c.delta = run.delta;
        c.converged = true;
        publish(std::move(c));
      }
    } catch (const std::exception& e) {
      for (double R : task.radii) {
        SweepCell c = blank(R);
        c.error = e.what();
        publish(std::move(c));
      }
    }
  });

  result.cells = options.completed;
  result.cells.insert(result.cells.end(), fresh.begin(), fresh.end());
  std::sort(result.cells.begin(), result.cells.end(), [](const SweepCell& a, const SweepCell& b) {
    return std::pair(a.kappa, a.R) < std::pair(b.kappa, b.R);
  });
  return result;
}

}  // namespace snlab
