#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "snlab/snlab.hpp"

namespace {

using namespace snlab;

int verbosity = 1;

void log(int level, const std::string& msg) {
  if (level > verbosity) return;
  static const auto start = std::chrono::steady_clock::now();
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::fprintf(stderr, "[snlab %8.2fs] %s\n", s, msg.c_str());
}

/// Scalar config keys exposed as --<key> flags.
const std::vector<std::string> flag_keys{
    "scenario", "n", "L", "dt", "t_max", "snapshot_stride", "boundary_guard", "release_boundary_guard",
    "kappa", "sigma", "R", "V0", "c", "kernel_mode", "kernel_a", "dt_tau", "final_dt_tau", "gs_tol",
    "gs_max_iterations", "output_dir", "workers", "control_run", "density_format", "localization_criterion",
    "kappa_bracket", "kappa_tolerance", "causality_stride", "causality_tolerance"};

const std::set<std::string> string_keys{"scenario", "kernel_mode", "output_dir", "density_format",
                                        "localization_criterion"};

json flag_value(const std::string& key, const std::string& text) {
  if (string_keys.count(key)) return text;
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    throw ConfigError("flag --" + key + ": cannot parse value '" + text + "'");
  }
}

struct Inputs {
  std::string config_path;
  std::map<std::string, std::string> flags;
  std::map<std::string, std::string> sweep_flags;
};

json assemble_document(const Inputs& in, const std::string& default_scenario) {
  json doc = json::object();
  if (!in.config_path.empty()) {
    std::ifstream f(in.config_path);
    if (!f) throw ConfigError("cannot read config file '" + in.config_path + "'");
    std::stringstream buf;
    buf << f.rdbuf();
    try {
      doc = json::parse(buf.str());
    } catch (const json::parse_error& e) {
      throw ConfigError("malformed config file '" + in.config_path + "': " + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config file must hold a JSON object");
  }
  for (const auto& [key, text] : in.flags)
    if (!text.empty()) doc[key] = flag_value(key, text);
  for (const auto& [key, text] : in.sweep_flags) {
    if (text.empty()) continue;
    if (!doc.contains("sweep")) doc["sweep"] = json::object();
    doc["sweep"][key] = key == "scenario" ? json(text) : flag_value("sweep-" + key, text);
  }
  if (!doc.contains("scenario")) doc["scenario"] = default_scenario;
  return doc;
}

json run_document(const std::string& command, const RunConfig& cfg) {
  return {{"version", version}, {"command", command}, {"config", to_json(cfg)}};
}

std::string r_suffix(double R) {
  std::string s = fmt15(R);
  for (char& ch : s)
    if (ch == '.') ch = 'p';
  return s;
}

void write_trajectory(const fs::path& dir, const RunConfig& cfg, const Grid& grid, const Trajectory& traj,
                      const std::vector<DiagnosticsSeries>& series, json& meta) {
  json files = json::array();
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::string name = i == 0 ? "diagnostics.csv" : "diagnostics_R" + r_suffix(series[i].R) + ".csv";
    write_diagnostics_csv(dir / name, series[i]);
    files.push_back({{"file", name}, {"R", series[i].R}, {"M_tilde", series[i].max_leak()}});
  }
  meta["diagnostics"] = files;
  if (cfg.density_format == DensityFormat::csv) {
    write_density_csv(dir / "density.csv", grid, traj);
    meta["density"] = "density.csv";
  } else if (cfg.density_format == DensityFormat::binary) {
    write_density_binary(dir / "density.bin", grid, traj);
    meta["density"] = "density.bin";
  }
  meta["snapshot_times"] = traj.times;
}

struct Evolution {
  Trajectory trajectory;
  std::vector<DiagnosticsSeries> series;
  json results;
};

Evolution run_evolution(const RunConfig& cfg) {
  Evolution out;
  if (cfg.scenario == "trap") {
    log(1, "trap release: R = " + fmt15(cfg.R.front()) + ", V0 = " + fmt15(cfg.V0) + ", kappa = " + fmt15(cfg.kappa));
    TrapRun run = run_trap(cfg.R.front(), cfg.V0, cfg.kappa, cfg.t_max, cfg.solver, cfg.control_run);
    log(1, "ground state after " + std::to_string(run.ground.iterations) + " iterations, E = " +
               fmt15(run.ground.energy));
    out.results = {{"ground_energy", run.ground.energy},
                   {"ground_iterations", run.ground.iterations},
                   {"E_kin", run.energies.kinetic},
                   {"E_int", run.energies.interaction},
                   {"delta", run.delta},
                   {"M_tilde", run.M_tilde}};
    if (run.control_drift) out.results["control_drift"] = *run.control_drift;
    out.trajectory = std::move(run.released);
    out.series.push_back(std::move(run.series));
  } else if (cfg.scenario == "gaussian" || cfg.scenario == "causality-check") {
    log(1, "gaussian release: sigma = " + fmt15(cfg.sigma) + ", kappa = " + fmt15(cfg.kappa));
    GaussianRun run = run_gaussian(cfg.sigma, cfg.kappa, cfg.R, cfg.t_max, cfg.solver);
    json m = json::object();
    for (const auto& s : run.series) m[fmt15(s.R)] = s.max_leak();
    out.results = {{"M_tilde", m}};
    out.trajectory = std::move(run.trajectory);
    out.series = std::move(run.series);
  } else {
    throw ConfigError("config key 'scenario': '" + cfg.scenario + "' cannot be evolved; use gaussian or trap");
  }
  log(1, "evolution finished with " + std::to_string(out.trajectory.times.size()) + " snapshots");
  return out;
}

int cmd_groundstate(const RunConfig& cfg) {
  const fs::path dir = cfg.output_dir;
  ensure_output_dir(dir);
  const Grid grid = cfg.solver.grid();
  const Kernel kernel = cfg.solver.kernel();
  const TrapPotential trap{cfg.V0, cfg.R.front(), true};
  log(1, "relaxing ground state: R = " + fmt15(trap.half_width) + ", V0 = " + fmt15(trap.depth) +
             ", kappa = " + fmt15(cfg.kappa));
  const GroundState gs = ground_state(grid, cfg.kappa, kernel, trap, cfg.solver.ground);
  const Energies e = energies(gs.psi, cfg.kappa, kernel);
  {
    auto out = open_for_write(dir / "ground_state.csv");
    out << "x,rho,re,im\n";
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const cplx a = gs.psi.amplitudes[k];
      out << fmt15(grid.x(k)) << ',' << fmt15(std::norm(a)) << ',' << fmt15(a.real()) << ',' << fmt15(a.imag())
          << '\n';
    }
  }
  json meta = run_document("groundstate", cfg);
  meta["results"] = {{"energy", gs.energy},     {"iterations", gs.iterations}, {"E_kin", e.kinetic},
                     {"E_int", e.interaction},  {"delta", e.ratio()},          {"file", "ground_state.csv"}};
  write_json(dir / "meta.json", meta);
  std::cout << meta["results"].dump(2) << '\n';
  log(1, "ground state written to " + (dir / "ground_state.csv").string());
  return 0;
}

int cmd_evolve(const RunConfig& cfg) {
  const fs::path dir = cfg.output_dir;
  ensure_output_dir(dir);
  Evolution ev = run_evolution(cfg);
  json meta = run_document("evolve", cfg);
  meta["results"] = ev.results;
  write_trajectory(dir, cfg, cfg.solver.grid(), ev.trajectory, ev.series, meta);
  write_json(dir / "meta.json", meta);
  std::cout << ev.results.dump(2) << '\n';
  return 0;
}

int cmd_sweep(const RunConfig& cfg) {
  if (cfg.scenario != "sweep") throw ConfigError("config key 'scenario': the sweep command needs scenario sweep");
  const fs::path dir = cfg.output_dir;
  const RunMetadata meta = metadata_for(cfg.sweep, cfg.solver);
  SweepStore store(dir, meta, to_json(cfg));
  const std::size_t total = cfg.sweep.R_values.size() * cfg.sweep.kappa_values.size();
  log(1, "sweep of " + std::to_string(total) + " cells (" + std::to_string(store.completed().size()) +
             " already done) on " + std::to_string(cfg.resolved_workers()) + " workers");
  SweepOptions options;
  options.workers = cfg.resolved_workers();
  options.completed = store.completed();
  std::size_t done = options.completed.size();
  options.on_cell = [&](const SweepCell& c) {
    store.append(c);
    ++done;
    log(c.converged ? 2 : 1, "cell kappa = " + fmt15(c.kappa) + ", R = " + fmt15(c.R) +
                                 (c.converged ? ": M_tilde = " + fmt15(c.M_tilde) : ": failed: " + c.error) + " [" +
                                 std::to_string(done) + "/" + std::to_string(total) + "]");
  };
  const SweepResult result = sweep(cfg.sweep, cfg.solver, options);
  store.finalize(result);
  json failures = json::array();
  for (const auto& c : result.cells)
    if (!c.converged) failures.push_back({{"kappa", c.kappa}, {"R", c.R}, {"error", c.error}});
  json summary = {{"cells", result.cells.size()}, {"failed", failures.size()}, {"file", "sweep.csv"}};
  if (!failures.empty()) {
    write_json(dir / "sweep.errors.json", failures);
    log(1, std::to_string(failures.size()) + " cells failed; see sweep.errors.json");
  }
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_causality(const RunConfig& cfg, const std::string& density_path, double snapshot_interval) {
  const fs::path dir = cfg.output_dir;
  ensure_output_dir(dir);
  Grid grid;
  Trajectory traj;
  json meta = run_document("causality", cfg);
  if (!density_path.empty()) {
    DensityTable table = read_density(density_path);
    if (table.rows.empty()) throw UsageError("density file '" + density_path + "' holds no snapshots");
    grid = make_grid(table.n_x, 0.5 * static_cast<double>(table.n_x) * table.dx);
    if (table.times.empty()) {
      if (!(snapshot_interval > 0.0))
        throw ConfigError("binary densities carry no times; pass --snapshot-interval");
      for (std::size_t s = 0; s < table.rows.size(); ++s) table.times.push_back(snapshot_interval * static_cast<double>(s));
    } else if (std::abs(table.x_min - grid.x_min()) > 1e-9 * std::max(1.0, grid.half_length())) {
      throw UsageError("density file grid is not symmetric about the origin");
    }
    traj.times = std::move(table.times);
    traj.snapshots = std::move(table.rows);
    meta["source"] = density_path;
  } else {
    grid = cfg.solver.grid();
    Evolution ev = run_evolution(cfg);
    traj = std::move(ev.trajectory);
    meta["source"] = cfg.scenario;
  }
  log(1, "checking " + std::to_string(traj.snapshots.size()) + " snapshots against the initial slice");
  const EvolutionCausality verdict = check_evolution_causal(grid, traj, cfg.solver.c, cfg.causality_stride,
                                                            cfg.causality_tolerance);
  {
    auto out = open_for_write(dir / "causality.csv");
    out << "t,leak,a,b\n";
    for (const auto& r : verdict.records) {
      out << fmt15(r.t) << ',' << fmt15(r.leak) << ',';
      if (r.interval) out << fmt15(r.interval->a) << ',' << fmt15(r.interval->b);
      else out << "nan,nan";
      out << '\n';
    }
  }
  meta["results"] = {{"causal", verdict.causal}, {"max_leak", verdict.max_leak}, {"file", "causality.csv"}};
  write_json(dir / "meta.json", meta);
  std::cout << meta["results"].dump(2) << '\n';
  return 0;
}

int cmd_kappa_c(const RunConfig& cfg) {
  const fs::path dir = cfg.output_dir;
  ensure_output_dir(dir);
  log(1, "bisecting kappa_c on [" + fmt15(cfg.kappa_lo) + ", " + fmt15(cfg.kappa_hi) + "]");
  const KappaCritical kc = estimate_kappa_c(cfg.sigma, cfg.kappa_lo, cfg.kappa_hi, cfg.t_max, cfg.solver,
                                            cfg.localization, cfg.kappa_tolerance);
  json evals = json::array();
  for (const auto& [k, loc] : kc.evaluations) evals.push_back({{"kappa", k}, {"localized", loc}});
  json meta = run_document("kappa-c", cfg);
  meta["results"] = {{"kappa_c", kc.kappa_c}, {"evaluations", evals}};
  write_json(dir / "meta.json", meta);
  std::cout << meta["results"].dump(2) << '\n';
  return 0;
}

int cmd_kappa_from_mass(std::optional<double> mass_kg, std::optional<double> daltons,
                        std::optional<double> length_scale) {
  if (mass_kg.has_value() == daltons.has_value()) throw ConfigError("give exactly one of --mass-kg or --daltons");
  const double mass = mass_kg ? *mass_kg : *daltons * units::dalton;
  const double l0 = length_scale ? *length_scale : units::length_scale_for_dalton_prefactor();
  const units::PhysicalParams p{mass, l0};
  const json out = {{"mass_kg", mass},
                    {"length_scale_m", l0},
                    {"kappa", units::kappa_from_physical(p)},
                    {"t0_s", units::t0_from_physical(p)}};
  std::cout << out.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"snlab: light-cone diagnostics for the 1+1 dimensional Schroedinger-Newton equation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version));
  int verbose = 0;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "More log output on stderr");
  app.add_flag("-q,--quiet", quiet, "Only errors on stderr");
  app.fallthrough();

  Inputs inputs;
  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--config", inputs.config_path, "JSON config file (flags override its keys)");
    for (const auto& key : flag_keys) sub->add_option("--" + key, inputs.flags[key], "config key '" + key + "'");
  };

  auto* groundstate = app.add_subcommand("groundstate", "Trapped ground state by imaginary-time relaxation");
  add_run_flags(groundstate);

  auto* evolve_cmd = app.add_subcommand("evolve", "Evolve a Gaussian packet or a released trap ground state");
  add_run_flags(evolve_cmd);

  auto* sweep_cmd = app.add_subcommand("sweep", "Maximal light-cone leak over a (kappa, R) grid; resumable");
  add_run_flags(sweep_cmd);
  for (const char* key : {"R_values", "kappa_values", "t_max", "scenario"})
    sweep_cmd->add_option(std::string("--sweep-") + key, inputs.sweep_flags[key], std::string("sweep key '") + key + "'");

  auto* causality_cmd = app.add_subcommand("causality", "Interval-leak causality check of an evolution");
  add_run_flags(causality_cmd);
  std::string density_path;
  double snapshot_interval = 0.0;
  causality_cmd->add_option("--density", density_path, "Check a density.csv or density.bin instead of running");
  causality_cmd->add_option("--snapshot-interval", snapshot_interval, "Time between snapshots of a binary density");

  auto* kappa_c_cmd = app.add_subcommand("kappa-c", "Bisect the critical coupling of a Gaussian packet");
  add_run_flags(kappa_c_cmd);

  auto* mass_cmd = app.add_subcommand("kappa-from-mass", "Dimensionless coupling of a physical mass");
  std::optional<double> mass_kg, daltons, length_scale;
  mass_cmd->add_option("--mass-kg", mass_kg, "Mass in kilograms");
  mass_cmd->add_option("--daltons", daltons, "Mass in daltons");
  mass_cmd->add_option("--length-scale", length_scale, "Length unit in metres (default: the unit at which kappa = 2e-36 (mass/Da)^3)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  verbosity = quiet ? 0 : 1 + verbose;

  try {
    if (*mass_cmd) return cmd_kappa_from_mass(mass_kg, daltons, length_scale);
    if (*groundstate) return cmd_groundstate(config_from_json(assemble_document(inputs, "trap")));
    if (*evolve_cmd) return cmd_evolve(config_from_json(assemble_document(inputs, "gaussian")));
    if (*sweep_cmd) return cmd_sweep(config_from_json(assemble_document(inputs, "sweep")));
    if (*causality_cmd)
      return cmd_causality(config_from_json(assemble_document(inputs, "causality-check")), density_path,
                           snapshot_interval);
    if (*kappa_c_cmd) return cmd_kappa_c(config_from_json(assemble_document(inputs, "gaussian")));
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "snlab: invalid configuration: %s\n", e.what());
    return 1;
  } catch (const ResolutionError& e) {
    std::fprintf(stderr, "snlab: invalid configuration: %s\n", e.what());
    return 1;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "snlab: invalid input: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "snlab: error: %s\n", e.what());
    return 2;
  }
  return 1;
}
