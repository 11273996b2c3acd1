#pragma once

// Run configuration and on-disk formats.
//
//   diagnostics.csv  t,norm,spread,M,E_kin,E_int           one row per snapshot
//   density.csv      t,x,rho                               long format
//   density.bin      "SNRHO1\0\0" | u64 n_t | u64 n_x | f64 dx | n_t*n_x f64   (little endian)
//   sweep.csv        kappa,R,M_tilde,delta,E_kin,E_int,converged
//   *.meta.json      every config field plus resolved numerical settings
//
// Text values carry 15 significant digits.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "snlab/diagnostics.hpp"
#include "snlab/error.hpp"
#include "snlab/experiments.hpp"
#include "snlab/grid.hpp"
#include "snlab/propagator.hpp"

#ifndef SNLAB_VERSION
#define SNLAB_VERSION "0.1.0"
#endif

namespace snlab {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* version = SNLAB_VERSION;

enum class DensityFormat { csv, binary, none };

struct RunConfig {
  std::string scenario = "gaussian";  ///< gaussian | trap | sweep | causality-check
  SolverConfig solver;
  double t_max = 30.0;
  double kappa = 0.0;
  double sigma = 1.0;
  std::vector<double> R{5.0};
  double V0 = 20.0;
  SweepSpec sweep;
  std::string output_dir = "snlab-out";
  std::size_t workers = 0;  ///< 0: SNLAB_WORKERS or hardware concurrency
  DensityFormat density_format = DensityFormat::csv;
  LocalizationCriterion localization = LocalizationCriterion::core_width;
  double kappa_lo = 0.1;
  double kappa_hi = 1.0;
  double kappa_tolerance = 0.02;
  std::size_t causality_stride = 1;
  double causality_tolerance = 1e-9;
  bool control_run = true;

  std::size_t resolved_workers() const { return workers > 0 ? workers : default_workers(); }
};

namespace detail {

inline double get_number(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config key '" + key + "': expected a number, got " + v.dump());
  return v.get<double>();
}

inline std::size_t get_count(const json& v, const std::string& key) {
  if (!v.is_number_integer() && !(v.is_number() && std::floor(v.get<double>()) == v.get<double>()))
    throw ConfigError("config key '" + key + "': expected an integer, got " + v.dump());
  const double d = v.get<double>();
  if (d < 0) throw ConfigError("config key '" + key + "': must be nonnegative");
  return static_cast<std::size_t>(d);
}

inline std::string get_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config key '" + key + "': expected a string, got " + v.dump());
  return v.get<std::string>();
}

inline bool get_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("config key '" + key + "': expected true/false, got " + v.dump());
  return v.get<bool>();
}

inline std::vector<double> get_numbers(const json& v, const std::string& key) {
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array()) throw ConfigError("config key '" + key + "': expected a number or list of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(get_number(e, key));
  return out;
}

template <class Check>
void require(bool ok, const std::string& key, Check&& message) {
  if (!ok) throw ConfigError("config key '" + key + "': " + message());
}

}  // namespace detail

/// Checks every numeric field against the preconditions of the module that
/// consumes it, so that invalid runs fail before any computation.
inline void validate(const RunConfig& cfg) {
  using detail::require;
  static const std::set<std::string> scenarios{"gaussian", "trap", "sweep", "causality-check"};
  require(scenarios.count(cfg.scenario) > 0, "scenario", [&] { return "unknown scenario '" + cfg.scenario + "'"; });

  const SolverConfig& s = cfg.solver;
  Grid grid;
  try {
    grid = s.grid();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config key 'n'/'L': ") + e.what());
  }
  require(s.stepper.dt > 0.0, "dt", [] { return "must be positive"; });
  require(s.stepper.snapshot_stride > 0, "snapshot_stride", [] { return "must be positive"; });
  require(s.stepper.boundary_guard > 0.0 && s.stepper.boundary_guard < 1.0, "boundary_guard",
          [] { return "must lie in (0, 1)"; });
  require(s.release_boundary_guard > 0.0 && s.release_boundary_guard < 1.0, "release_boundary_guard",
          [] { return "must lie in (0, 1)"; });
  require(s.kernel_a == 0.0 || s.kernel_a >= grid.dx() / 4.0, "kernel_a",
          [&] { return "must be 0 (grid spacing) or >= dx/4 = " + std::to_string(grid.dx() / 4.0); });
  require(s.c > 0.0, "c", [] { return "must be positive"; });
  require(s.ground.dt_tau > 0.0, "dt_tau", [] { return "must be positive"; });
  require(s.ground.final_dt_tau > 0.0, "final_dt_tau", [] { return "must be positive"; });
  require(s.ground.tol > 0.0, "gs_tol", [] { return "must be positive"; });
  require(s.ground.max_iterations > 0, "gs_max_iterations", [] { return "must be positive"; });
  require(cfg.t_max > 0.0, "t_max", [] { return "must be positive"; });
  try {
    step_count(cfg.t_max, s.stepper.dt);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config key 't_max': ") + e.what());
  }
  require(cfg.kappa >= 0.0, "kappa", [] { return "must be nonnegative"; });
  require(cfg.V0 > 0.0, "V0", [] { return "must be positive"; });
  require(!cfg.R.empty(), "R", [] { return "needs at least one value"; });
  for (double R : cfg.R) {
    require(R > 0.0, "R", [] { return "values must be positive"; });
    if (cfg.scenario != "sweep")
      require(R + s.c * cfg.t_max <= grid.half_length() - 0.5 * grid.dx(), "R",
              [&] { return "light cone of R = " + std::to_string(R) + " leaves the grid by t_max"; });
  }
  const bool uses_sigma = cfg.scenario == "gaussian" || cfg.scenario == "causality-check" ||
                          (cfg.scenario == "sweep" && cfg.sweep.scenario == Scenario::gaussian);
  if (uses_sigma)
    require(cfg.sigma >= 4.0 * grid.dx() && cfg.sigma <= grid.half_length() / 8.0, "sigma",
            [&] { return "must lie in [4 dx, L/8] = [" + std::to_string(4 * grid.dx()) + ", " +
                         std::to_string(grid.half_length() / 8) + "]"; });
  require(cfg.kappa_lo >= 0.0 && cfg.kappa_hi > cfg.kappa_lo, "kappa_bracket",
          [] { return "needs 0 <= lo < hi"; });
  require(cfg.kappa_tolerance > 0.0, "kappa_tolerance", [] { return "must be positive"; });
  require(cfg.causality_stride > 0, "causality_stride", [] { return "must be positive"; });
  require(cfg.causality_tolerance >= 0.0, "causality_tolerance", [] { return "must be nonnegative"; });
  if (cfg.scenario == "sweep") {
    try {
      validate(cfg.sweep);
      step_count(cfg.sweep.t_max, s.stepper.dt);
      check_cone_fits(s, cfg.sweep.R_values, cfg.sweep.t_max);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("config key 'sweep': ") + e.what());
    }
  }
}

/// Builds a validated RunConfig from a flat JSON object. Unknown keys are
/// rejected; missing keys keep their defaults.
inline RunConfig config_from_json(const json& doc) {
  using namespace detail;
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig cfg;
  bool sweep_given = false;
  for (const auto& [key, v] : doc.items()) {
    if (key == "scenario") cfg.scenario = get_string(v, key);
    else if (key == "n") cfg.solver.n = get_count(v, key);
    else if (key == "L") cfg.solver.L = get_number(v, key);
    else if (key == "dt") cfg.solver.stepper.dt = get_number(v, key);
    else if (key == "t_max") cfg.t_max = get_number(v, key);
    else if (key == "snapshot_stride") cfg.solver.stepper.snapshot_stride = get_count(v, key);
    else if (key == "boundary_guard") cfg.solver.stepper.boundary_guard = get_number(v, key);
    else if (key == "release_boundary_guard") cfg.solver.release_boundary_guard = get_number(v, key);
    else if (key == "kappa") cfg.kappa = get_number(v, key);
    else if (key == "sigma") cfg.sigma = get_number(v, key);
    else if (key == "R") cfg.R = get_numbers(v, key);
    else if (key == "V0") cfg.V0 = get_number(v, key);
    else if (key == "c") cfg.solver.c = get_number(v, key);
    else if (key == "kernel_mode") cfg.solver.kernel_mode = kernel_mode_from_string(get_string(v, key));
    else if (key == "kernel_a") cfg.solver.kernel_a = get_number(v, key);
    else if (key == "dt_tau") cfg.solver.ground.dt_tau = get_number(v, key);
    else if (key == "final_dt_tau") cfg.solver.ground.final_dt_tau = get_number(v, key);
    else if (key == "gs_tol") cfg.solver.ground.tol = get_number(v, key);
    else if (key == "gs_max_iterations") cfg.solver.ground.max_iterations = get_count(v, key);
    else if (key == "output_dir") cfg.output_dir = get_string(v, key);
    else if (key == "workers") cfg.workers = get_count(v, key);
    else if (key == "control_run") cfg.control_run = get_bool(v, key);
    else if (key == "density_format") {
      const auto f = get_string(v, key);
      if (f == "csv") cfg.density_format = DensityFormat::csv;
      else if (f == "binary") cfg.density_format = DensityFormat::binary;
      else if (f == "none") cfg.density_format = DensityFormat::none;
      else throw ConfigError("config key 'density_format': expected csv, binary or none");
    } else if (key == "localization_criterion") {
      cfg.localization = localization_criterion_from_string(get_string(v, key));
    } else if (key == "kappa_bracket") {
      const auto b = get_numbers(v, key);
      if (b.size() != 2) throw ConfigError("config key 'kappa_bracket': expected [lo, hi]");
      cfg.kappa_lo = b[0];
      cfg.kappa_hi = b[1];
    } else if (key == "kappa_tolerance") cfg.kappa_tolerance = get_number(v, key);
    else if (key == "causality_stride") cfg.causality_stride = get_count(v, key);
    else if (key == "causality_tolerance") cfg.causality_tolerance = get_number(v, key);
    else if (key == "sweep") {
      if (!v.is_object()) throw ConfigError("config key 'sweep': expected an object");
      sweep_given = true;
      for (const auto& [sk, sv] : v.items()) {
        const std::string full = "sweep." + sk;
        if (sk == "R_values") cfg.sweep.R_values = get_numbers(sv, full);
        else if (sk == "kappa_values") cfg.sweep.kappa_values = get_numbers(sv, full);
        else if (sk == "t_max") cfg.sweep.t_max = get_number(sv, full);
        else if (sk == "scenario") {
          const auto sc = get_string(sv, full);
          if (sc == "trap") cfg.sweep.scenario = Scenario::trap;
          else if (sc == "gaussian") cfg.sweep.scenario = Scenario::gaussian;
          else throw ConfigError("config key 'sweep.scenario': expected trap or gaussian");
        } else throw ConfigError("unknown config key '" + full + "'");
      }
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  cfg.sweep.V0 = cfg.V0;
  cfg.sweep.sigma = cfg.sigma;
  if (!sweep_given) cfg.sweep.t_max = cfg.t_max;
  validate(cfg);
  return cfg;
}

inline RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config document: ") + e.what());
  }
  return config_from_json(doc);
}

/// Every config field, with resolved defaults (kernel a, worker count).
inline json to_json(const RunConfig& cfg) {
  const auto& s = cfg.solver;
  json sweep = {{"R_values", cfg.sweep.R_values},
                {"kappa_values", cfg.sweep.kappa_values},
                {"t_max", cfg.sweep.t_max},
                {"scenario", std::string(to_string(cfg.sweep.scenario))}};
  const char* density = cfg.density_format == DensityFormat::csv      ? "csv"
                        : cfg.density_format == DensityFormat::binary ? "binary"
                                                                      : "none";
  return {{"scenario", cfg.scenario},
          {"n", s.n},
          {"L", s.L},
          {"dx", s.grid().dx()},
          {"dt", s.stepper.dt},
          {"t_max", cfg.t_max},
          {"snapshot_stride", s.stepper.snapshot_stride},
          {"boundary_guard", s.stepper.boundary_guard},
          {"release_boundary_guard", s.release_boundary_guard},
          {"kappa", cfg.kappa},
          {"sigma", cfg.sigma},
          {"R", cfg.R},
          {"V0", cfg.V0},
          {"c", s.c},
          {"kernel_mode", std::string(to_string(s.kernel_mode))},
          {"kernel_a", s.resolved_kernel_a()},
          {"dt_tau", s.ground.dt_tau},
          {"final_dt_tau", s.ground.final_dt_tau},
          {"gs_tol", s.ground.tol},
          {"gs_max_iterations", s.ground.max_iterations},
          {"output_dir", cfg.output_dir},
          {"workers", cfg.resolved_workers()},
          {"control_run", cfg.control_run},
          {"density_format", density},
          {"localization_criterion", std::string(to_string(cfg.localization))},
          {"kappa_bracket", {cfg.kappa_lo, cfg.kappa_hi}},
          {"kappa_tolerance", cfg.kappa_tolerance},
          {"causality_stride", cfg.causality_stride},
          {"causality_tolerance", cfg.causality_tolerance},
          {"sweep", sweep}};
}

/// Fails early when `dir` cannot be created or written.
inline void ensure_output_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  const fs::path probe = dir / ".snlab-write-test";
  {
    std::ofstream out(probe);
    if (!out) throw IoError("output directory '" + dir.string() + "' is not writable");
  }
  fs::remove(probe, ec);
}

inline std::string fmt15(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

inline std::ofstream open_for_write(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

inline void write_diagnostics_csv(const fs::path& path, const DiagnosticsSeries& s) {
  auto out = open_for_write(path);
  out << "t,norm,spread,M,E_kin,E_int\n";
  for (std::size_t i = 0; i < s.size(); ++i)
    out << fmt15(s.times[i]) << ',' << fmt15(s.norm[i]) << ',' << fmt15(s.spread[i]) << ',' << fmt15(s.M[i])
        << ',' << fmt15(s.E_kin[i]) << ',' << fmt15(s.E_int[i]) << '\n';
}

inline void write_density_csv(const fs::path& path, const Grid& grid, const Trajectory& traj) {
  auto out = open_for_write(path);
  out << "t,x,rho\n";
  for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
    const std::string t = fmt15(traj.times[s]);
    for (std::size_t k = 0; k < grid.size(); ++k)
      out << t << ',' << fmt15(grid.x(k)) << ',' << fmt15(traj.snapshots[s][k]) << '\n';
  }
}

namespace detail {

static_assert(std::endian::native == std::endian::little, "binary density format assumes a little-endian host");

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T take(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw IoError("truncated binary density file");
  return v;
}

}  // namespace detail

inline constexpr char density_magic[8] = {'S', 'N', 'R', 'H', 'O', '1', '\0', '\0'};

inline void write_density_binary(const fs::path& path, const Grid& grid, const Trajectory& traj) {
  auto out = open_for_write(path, std::ios::out | std::ios::binary);
  out.write(density_magic, sizeof density_magic);
  detail::put<std::uint64_t>(out, traj.snapshots.size());
  detail::put<std::uint64_t>(out, grid.size());
  detail::put<double>(out, grid.dx());
  for (const auto& rho : traj.snapshots)
    out.write(reinterpret_cast<const char*>(rho.data()), static_cast<std::streamsize>(rho.size() * sizeof(double)));
}

/// Densities read back from disk. Times are unknown for the binary format.
struct DensityTable {
  std::size_t n_x = 0;
  double dx = 0.0;
  double x_min = 0.0;
  std::vector<double> times;
  std::vector<std::vector<double>> rows;
};

inline DensityTable read_density_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, density_magic, sizeof magic) != 0)
    throw IoError("'" + path.string() + "' is not an SNRHO1 density file");
  DensityTable table;
  const auto n_t = detail::take<std::uint64_t>(in);
  table.n_x = detail::take<std::uint64_t>(in);
  table.dx = detail::take<double>(in);
  table.x_min = -static_cast<double>(table.n_x / 2) * table.dx;
  table.rows.assign(n_t, std::vector<double>(table.n_x));
  for (auto& row : table.rows) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(double)));
    if (!in) throw IoError("truncated binary density file");
  }
  return table;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

inline double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw IoError("not a number: '" + s + "'");
  return v;
}

inline DensityTable read_density_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "t,x,rho") throw IoError("'" + path.string() + "' lacks the t,x,rho header");
  DensityTable table;
  std::vector<double> xs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv_line(line);
    if (c.size() != 3) throw IoError("malformed density row: " + line);
    const double t = parse_double(c[0]);
    if (table.times.empty() || t != table.times.back()) {
      table.times.push_back(t);
      table.rows.emplace_back();
    }
    if (table.rows.size() == 1) xs.push_back(parse_double(c[1]));
    table.rows.back().push_back(parse_double(c[2]));
  }
  if (table.rows.empty()) return table;
  table.n_x = table.rows.front().size();
  for (const auto& r : table.rows)
    if (r.size() != table.n_x) throw IoError("density snapshots differ in length");
  table.x_min = xs.front();
  table.dx = xs.size() > 1 ? (xs.back() - xs.front()) / static_cast<double>(xs.size() - 1) : 0.0;
  return table;
}

inline DensityTable read_density(const fs::path& path) {
  return path.extension() == ".bin" ? read_density_binary(path) : read_density_csv(path);
}

inline constexpr const char* sweep_header = "kappa,R,M_tilde,delta,E_kin,E_int,converged";

inline std::string sweep_row(const SweepCell& c) {
  return fmt15(c.kappa) + ',' + fmt15(c.R) + ',' + fmt15(c.M_tilde) + ',' + fmt15(c.delta) + ',' +
         fmt15(c.E_kin) + ',' + fmt15(c.E_int) + ',' + (c.converged ? "1" : "0");
}

inline void write_sweep_csv(const fs::path& path, const std::vector<SweepCell>& cells) {
  const fs::path tmp = path.string() + ".tmp";
  {
    auto out = open_for_write(tmp);
    out << sweep_header << '\n';
    for (const auto& c : cells) out << sweep_row(c) << '\n';
  }
  fs::rename(tmp, path);
}

inline std::vector<SweepCell> read_sweep_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != sweep_header) throw IoError("'" + path.string() + "' lacks the sweep header");
  std::vector<SweepCell> cells;
  while (std::getline(in, line)) {
    const auto c = split_csv_line(line);
    if (c.size() != 7) continue;  // partial trailing row from an interrupted run
    SweepCell cell;
    cell.kappa = parse_double(c[0]);
    cell.R = parse_double(c[1]);
    cell.M_tilde = parse_double(c[2]);
    cell.delta = parse_double(c[3]);
    cell.E_kin = parse_double(c[4]);
    cell.E_int = parse_double(c[5]);
    cell.converged = c[6] == "1";
    cells.push_back(cell);
  }
  return cells;
}

inline void write_json(const fs::path& path, const json& doc) {
  auto out = open_for_write(path);
  out << doc.dump(2) << '\n';
}

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

inline json metadata_json(const RunMetadata& m) {
  return {{"n", m.n},         {"L", m.L},           {"dt", m.dt},       {"t_max", m.t_max},
          {"kernel_mode", m.kernel_mode}, {"kernel_a", m.kernel_a}, {"scenario", m.scenario},
          {"V0", m.V0},       {"sigma", m.sigma},   {"final_dt_tau", m.final_dt_tau},
          {"canonical", m.canonical()},   {"hash", m.hash()}};
}

/// Incremental, resumable persistence of a sweep: rows are appended as cells
/// finish, and a rerun with identical metadata skips every converged cell.
class SweepStore {
 public:
  SweepStore(fs::path dir, const RunMetadata& meta, const json& config)
      : csv_(dir / "sweep.csv"), meta_path_(dir / "sweep.meta.json"), meta_(meta) {
    ensure_output_dir(dir);
    if (fs::exists(csv_) && fs::exists(meta_path_)) {
      const json stored = read_json(meta_path_);
      if (stored.contains("metadata") && stored["metadata"].value("hash", std::uint64_t{0}) == meta.hash()) {
        for (auto& c : read_sweep_csv(csv_)) {
          if (!c.converged) continue;
          c.metadata = meta;
          completed_.push_back(std::move(c));
        }
      }
    }
    json doc = {{"version", version}, {"config", config}, {"metadata", metadata_json(meta)}};
    write_json(meta_path_, doc);
    write_sweep_csv(csv_, completed_);
    out_.open(csv_, std::ios::app);
    if (!out_) throw IoError("cannot append to '" + csv_.string() + "'");
  }

  const std::vector<SweepCell>& completed() const { return completed_; }

  void append(const SweepCell& cell) {
    out_ << sweep_row(cell) << '\n';
    out_.flush();
  }

  /// Rewrites the table sorted by (kappa, R) so that output is deterministic.
  void finalize(const SweepResult& result) {
    out_.close();
    write_sweep_csv(csv_, result.cells);
  }

  const fs::path& csv_path() const { return csv_; }

 private:
  fs::path csv_;
  fs::path meta_path_;
  RunMetadata meta_;
  std::vector<SweepCell> completed_;
  std::ofstream out_;
};

}  // namespace snlab
