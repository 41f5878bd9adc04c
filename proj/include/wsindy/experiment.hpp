#pragma once

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "wsindy/assembly.hpp"
#include "wsindy/dataset.hpp"
#include "wsindy/grid.hpp"
#include "wsindy/library.hpp"
#include "wsindy/metrics.hpp"
#include "wsindy/models.hpp"
#include "wsindy/mstls.hpp"
#include "wsindy/rng.hpp"
#include "wsindy/simulate.hpp"
#include "wsindy/test_functions.hpp"

namespace wsindy {

// Full description of an identification study: which model preset, which
// sweep axes (particle count, experiment count, measurement noise, sigma
// mode), and the numerical knobs of every pipeline stage.  Zero-valued
// numeric fields mean "use the preset default"; resolve_config fills them in.
struct ExperimentConfig {
  // [experiment]
  std::string preset = "qanr1d";
  std::string sigma_mode;  // preset default when empty
  std::uint64_t seed = 1;
  int trials = 1;
  int threads = 1;
  std::string outdir = "out";
  // [sweep]
  std::vector<int> n_particles;
  std::vector<int> n_experiments;
  std::vector<double> noise_eps;
  std::vector<std::string> sigma_modes;  // optional multi-mode sweep
  // [sim]
  int n_times = 0;
  double dt_fine = 0.0;
  int subsample = 0;
  // [grid]
  int bins = 0;
  bool pooled_std = false;
  // [basis]
  SupportParams basis{0, 0, 0, 0, 0, 0};
  // [mstls]
  double lambda_min_exp = -4.0;
  double lambda_max_exp = 0.0;
  int lambda_count = 100;
};

namespace detail {

struct PresetDefaults {
  std::string sigma_mode;
  int n_times;
  double dt_fine;
  int subsample;
  int n_particles;
  int n_experiments;
};

inline PresetDefaults preset_defaults(const std::string& preset) {
  if (preset == "qanr1d") return {"const", 100, 1e-3, 10, 8000, 2};
  if (preset == "cos2d") return {"w1", 101, 1e-4, 200, 2000, 10};
  if (preset == "log2d") return {"none", 81, 2.5e-3, 40, 4000, 1};
  throw std::invalid_argument("unknown preset '" + preset + "'");
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

inline ExperimentConfig resolve_config(ExperimentConfig cfg) {
  const detail::PresetDefaults d = detail::preset_defaults(cfg.preset);
  if (cfg.sigma_mode.empty()) cfg.sigma_mode = d.sigma_mode;
  if (cfg.trials < 1) throw std::invalid_argument("config: trials must be at least 1");
  if (cfg.threads < 1) cfg.threads = 1;
  if (cfg.n_particles.empty()) cfg.n_particles = {d.n_particles};
  if (cfg.n_experiments.empty()) cfg.n_experiments = {d.n_experiments};
  if (cfg.noise_eps.empty()) cfg.noise_eps = {0.0};
  if (cfg.n_times == 0) cfg.n_times = d.n_times;
  if (cfg.dt_fine == 0.0) cfg.dt_fine = d.dt_fine;
  if (cfg.subsample == 0) cfg.subsample = d.subsample;
  // bins: 0 keeps the dimension default applied by build_domain
  const SupportParams sp = support_parameters(cfg.preset);
  if (cfg.basis.m_x == 0) cfg.basis.m_x = sp.m_x;
  if (cfg.basis.m_t == 0) cfg.basis.m_t = sp.m_t;
  if (cfg.basis.p_x == 0) cfg.basis.p_x = sp.p_x;
  if (cfg.basis.p_t == 0) cfg.basis.p_t = sp.p_t;
  if (cfg.basis.s_x == 0) cfg.basis.s_x = sp.s_x;
  if (cfg.basis.s_t == 0) cfg.basis.s_t = sp.s_t;
  if (cfg.lambda_count < 1) throw std::invalid_argument("config: lambda_count must be positive");
  return cfg;
}

inline std::vector<double> lambda_grid(const ExperimentConfig& cfg) {
  std::vector<double> grid(static_cast<std::size_t>(cfg.lambda_count));
  for (int i = 0; i < cfg.lambda_count; ++i) {
    const double t = cfg.lambda_count == 1
                         ? 0.0
                         : static_cast<double>(i) / (cfg.lambda_count - 1);
    grid[static_cast<std::size_t>(i)] =
        std::pow(10.0, cfg.lambda_min_exp + (cfg.lambda_max_exp - cfg.lambda_min_exp) * t);
  }
  return grid;
}

// ---------------------------------------------------------------------------
// INI-style configuration files
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

template <typename T>
T parse_number(const std::string& value, int line) {
  std::stringstream ss(value);
  T out;
  ss >> out;
  if (ss.fail() || !trim(ss.eof() ? "" : value.substr(static_cast<std::size_t>(ss.tellg())))
                        .empty()) {
    throw std::invalid_argument("config line " + std::to_string(line) +
                                ": cannot parse number '" + value + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& value, int line) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw std::invalid_argument("config line " + std::to_string(line) +
                              ": cannot parse boolean '" + value + "'");
}

}  // namespace detail

// Parses an INI-style experiment description with sections [experiment],
// [sweep], [sim], [grid], [basis], [mstls].  Unknown sections or keys are
// errors; the result still needs resolve_config.
inline ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(ss, raw)) {
    ++line;
    std::string s = detail::trim(raw);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') {
        throw std::invalid_argument("config line " + std::to_string(line) +
                                    ": malformed section header");
      }
      section = s.substr(1, s.size() - 2);
      if (section != "experiment" && section != "sweep" && section != "sim" &&
          section != "grid" && section != "basis" && section != "mstls") {
        throw std::invalid_argument("config line " + std::to_string(line) +
                                    ": unknown section [" + section + "]");
      }
      continue;
    }
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line) +
                                  ": expected key = value");
    }
    const std::string key = detail::trim(s.substr(0, eq));
    const std::string value = detail::trim(s.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw std::invalid_argument("config line " + std::to_string(line) +
                                  ": empty key or value");
    }
    auto unknown = [&]() -> std::invalid_argument {
      return std::invalid_argument("config line " + std::to_string(line) +
                                   ": unknown key '" + key + "' in [" + section + "]");
    };
    if (section == "experiment") {
      if (key == "preset") cfg.preset = value;
      else if (key == "sigma_mode") cfg.sigma_mode = value;
      else if (key == "seed") cfg.seed = detail::parse_number<std::uint64_t>(value, line);
      else if (key == "trials") cfg.trials = detail::parse_number<int>(value, line);
      else if (key == "threads") cfg.threads = detail::parse_number<int>(value, line);
      else if (key == "outdir") cfg.outdir = value;
      else throw unknown();
    } else if (section == "sweep") {
      const std::vector<std::string> items = detail::split_list(value);
      if (items.empty()) {
        throw std::invalid_argument("config line " + std::to_string(line) +
                                    ": empty list for '" + key + "'");
      }
      if (key == "n_particles") {
        cfg.n_particles.clear();
        for (const auto& it : items) cfg.n_particles.push_back(detail::parse_number<int>(it, line));
      } else if (key == "n_experiments") {
        cfg.n_experiments.clear();
        for (const auto& it : items)
          cfg.n_experiments.push_back(detail::parse_number<int>(it, line));
      } else if (key == "noise_eps") {
        cfg.noise_eps.clear();
        for (const auto& it : items) cfg.noise_eps.push_back(detail::parse_number<double>(it, line));
      } else if (key == "sigma_modes") {
        cfg.sigma_modes = items;
      } else {
        throw unknown();
      }
    } else if (section == "sim") {
      if (key == "n_times") cfg.n_times = detail::parse_number<int>(value, line);
      else if (key == "dt_fine") cfg.dt_fine = detail::parse_number<double>(value, line);
      else if (key == "subsample") cfg.subsample = detail::parse_number<int>(value, line);
      else throw unknown();
    } else if (section == "grid") {
      if (key == "bins") cfg.bins = detail::parse_number<int>(value, line);
      else if (key == "pooled_std") cfg.pooled_std = detail::parse_bool(value, line);
      else throw unknown();
    } else if (section == "basis") {
      if (key == "m_x") cfg.basis.m_x = detail::parse_number<int>(value, line);
      else if (key == "m_t") cfg.basis.m_t = detail::parse_number<int>(value, line);
      else if (key == "p_x") cfg.basis.p_x = detail::parse_number<int>(value, line);
      else if (key == "p_t") cfg.basis.p_t = detail::parse_number<int>(value, line);
      else if (key == "s_x") cfg.basis.s_x = detail::parse_number<int>(value, line);
      else if (key == "s_t") cfg.basis.s_t = detail::parse_number<int>(value, line);
      else throw unknown();
    } else if (section == "mstls") {
      if (key == "lambda_min_exp") cfg.lambda_min_exp = detail::parse_number<double>(value, line);
      else if (key == "lambda_max_exp") cfg.lambda_max_exp = detail::parse_number<double>(value, line);
      else if (key == "lambda_count") cfg.lambda_count = detail::parse_number<int>(value, line);
      else throw unknown();
    } else {
      throw std::invalid_argument("config line " + std::to_string(line) +
                                  ": key outside of any section");
    }
  }
  return cfg;
}

inline ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// ---------------------------------------------------------------------------
// Sweep cells
// ---------------------------------------------------------------------------

// One point of the sweep grid.  The seed is derived from the cell values, not
// the enumeration order, so editing the sweep never reshuffles other cells.
struct CellSpec {
  std::string preset;
  std::string sigma_mode;
  int n_particles = 0;
  int n_experiments = 0;
  double eps = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
};

inline std::uint64_t cell_seed(std::uint64_t master, const std::string& preset,
                               const std::string& sigma_mode, int n_particles,
                               int n_experiments, double eps, int trial) {
  std::uint64_t h = hash_mix(master, detail::fnv1a64(preset));
  h = hash_mix(h, detail::fnv1a64(sigma_mode));
  h = hash_mix(h, static_cast<std::uint64_t>(n_particles));
  h = hash_mix(h, static_cast<std::uint64_t>(n_experiments));
  h = hash_mix(h, std::bit_cast<std::uint64_t>(eps));
  return hash_mix(h, static_cast<std::uint64_t>(trial));
}

inline std::vector<CellSpec> make_cells(const ExperimentConfig& cfg) {
  std::vector<std::string> modes = cfg.sigma_modes;
  if (modes.empty()) modes = {cfg.sigma_mode};
  std::vector<CellSpec> cells;
  for (const std::string& mode : modes) {
    for (int n : cfg.n_particles) {
      for (int m : cfg.n_experiments) {
        for (double eps : cfg.noise_eps) {
          for (int trial = 0; trial < cfg.trials; ++trial) {
            CellSpec spec;
            spec.preset = cfg.preset;
            spec.sigma_mode = mode;
            spec.n_particles = n;
            spec.n_experiments = m;
            spec.eps = eps;
            spec.trial = trial;
            spec.seed = cell_seed(cfg.seed, cfg.preset, mode, n, m, eps, trial);
            cells.push_back(std::move(spec));
          }
        }
      }
    }
  }
  if (cells.empty()) throw std::invalid_argument("sweep grid is empty");
  return cells;
}

// ---------------------------------------------------------------------------
// Homogenized diffusivity reference
// ---------------------------------------------------------------------------

namespace detail {

template <typename F>
double simpson2d(F&& f, double x0, double x1, double y0, double y1, int n) {
  const double hx = (x1 - x0) / n;
  const double hy = (y1 - y0) / n;
  auto weight = [n](int i) { return i == 0 || i == n ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0); };
  double total = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double wx = weight(i);
    double row = 0.0;
    for (int j = 0; j <= n; ++j) row += weight(j) * f(x0 + i * hx, y0 + j * hy);
    total += wx * row;
  }
  return total * hx * hy / 9.0;
}

}  // namespace detail

// Harmonic cell average of a(x) = 1 + amp cos(w x1) cos(w x2) over the grid
// rectangle: |D| / integral of 1/a.  The oscillation-averaged density sees the
// constant diffusivity 2 * this value when sigma^2 = 2 a.  Integrated by
// composite Simpson rule, refined until two consecutive levels agree to 1e-6
// relative.
inline double harmonic_cell_average(const Grid& grid, double omega, double amp = 0.95) {
  if (grid.dim != 2) throw std::invalid_argument("harmonic_cell_average: 2D grids only");
  if (std::abs(amp) >= 1.0) {
    throw std::invalid_argument("harmonic_cell_average: |amp| must be below 1");
  }
  const double x0 = grid.origin[0], x1 = grid.origin[0] + grid.extent(0);
  const double y0 = grid.origin[1], y1 = grid.origin[1] + grid.extent(1);
  auto f = [omega, amp](double x, double y) {
    return 1.0 / (1.0 + amp * std::cos(omega * x) * std::cos(omega * y));
  };
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (int n = 64; n <= 32768; n *= 2) {
    const double cur = detail::simpson2d(f, x0, x1, y0, y1, n);
    if (std::isfinite(prev) && std::abs(cur - prev) <= 1e-6 * std::abs(cur)) {
      const double area = (x1 - x0) * (y1 - y0);
      return area / cur;
    }
    prev = cur;
  }
  throw std::runtime_error("harmonic_cell_average: quadrature did not converge");
}

// Fills placeholder true coefficients that depend on the identification domain
// (the homogenized diffusivity of the oscillatory 2D model).
inline std::vector<TrueTerm> resolved_true_terms(const IpsModel& model,
                                                 const std::string& preset,
                                                 const std::string& sigma_mode,
                                                 const Grid& grid) {
  std::vector<TrueTerm> terms = model.true_terms;
  for (TrueTerm& t : terms) {
    if (std::isfinite(t.value)) continue;
    if (preset == "cos2d" && !sigma_mode.empty() && sigma_mode[0] == 'w') {
      const double omega = std::stod(sigma_mode.substr(1));
      t.value = 2.0 * harmonic_cell_average(grid, omega);
    } else {
      throw std::runtime_error("no closed-form true coefficient for '" + t.descriptor + "'");
    }
  }
  return terms;
}

// ---------------------------------------------------------------------------
// Running one sweep cell
// ---------------------------------------------------------------------------

struct CellResult {
  CellSpec spec;
  Grid grid;
  std::vector<std::string> descriptors;  // library column order
  Eigen::VectorXd coeffs;
  Eigen::VectorXd w_true;
  std::vector<std::string> support_descriptors;
  double lambda_hat = 0.0;
  std::vector<double> lambda_grid;
  std::vector<double> loss_curve;
  double rel_residual = std::numeric_limits<double>::quiet_NaN();
  double kappa = std::numeric_limits<double>::quiet_NaN();
  double tpr = std::numeric_limits<double>::quiet_NaN();
  double tpr_drift = std::numeric_limits<double>::quiet_NaN();
  bool identified = false;
  FunctionErrors errors{std::numeric_limits<double>::quiet_NaN(),
                        std::numeric_limits<double>::quiet_NaN(),
                        std::numeric_limits<double>::quiet_NaN()};
  double walltime_sim = 0.0;
  double walltime_assemble = 0.0;
  double walltime_solve = 0.0;
  std::string error;  // nonempty if the cell failed
};

// Identification stage on an existing dataset (shared by the simulate-first
// path and the load-a-dataset CLI path).
inline CellResult identify_dataset(const ExperimentConfig& cfg, const CellSpec& spec,
                                   const ParticleDataset& data) {
  using clock = std::chrono::steady_clock;
  CellResult result;
  result.spec = spec;

  const auto t0 = clock::now();
  const IpsModel model = builtin_model(spec.preset, spec.sigma_mode);
  result.grid = build_domain(data, cfg.bins, cfg.pooled_std);
  const HistogramField field = density_field(data, result.grid);
  const TestBasis basis =
      make_basis(result.grid, field.times, cfg.basis);
  const TrialLibrary lib = build_library(
      spec.preset, model.cutoff_delta > 0.0 ? model.cutoff_delta : 0.01);
  result.descriptors = lib.descriptors();
  const WeakSystem sys = assemble(field, lib, basis);
  const auto t1 = clock::now();
  result.walltime_assemble = std::chrono::duration<double>(t1 - t0).count();

  const SparseSolution sol = mstls(sys.G, sys.b, lambda_grid(cfg));
  result.coeffs = sol.coeffs;
  result.lambda_hat = sol.lambda_hat;
  result.lambda_grid = sol.lambda_grid;
  result.loss_curve = sol.loss_curve;
  result.rel_residual = sol.rel_residual;
  for (int j : sol.support) result.support_descriptors.push_back(lib.descriptor(j));
  result.kappa = condition_report(sys.G).kappa;

  const std::vector<TrueTerm> terms =
      resolved_true_terms(model, spec.preset, spec.sigma_mode, result.grid);
  result.w_true = align_true_coeffs(lib, terms);
  result.tpr = tpr(result.coeffs, result.w_true);
  result.tpr_drift = tpr_drift(result.coeffs, result.w_true, lib);
  result.identified = result.tpr == 1.0;
  if (result.identified) {
    result.errors = function_errors(result.coeffs, result.w_true, lib, result.grid);
  }
  const auto t2 = clock::now();
  result.walltime_solve = std::chrono::duration<double>(t2 - t1).count();
  return result;
}

// Simulates the cell's particle system and runs identification on it.
// Failures are captured in the result instead of thrown, so a sweep survives
// individual bad cells.
inline CellResult run_cell(const ExperimentConfig& cfg, const CellSpec& spec) {
  using clock = std::chrono::steady_clock;
  try {
    const IpsModel model = builtin_model(spec.preset, spec.sigma_mode);
    const InitialDistribution init = builtin_init(spec.preset);
    SimConfig sim;
    sim.n_particles = spec.n_particles;
    sim.n_experiments = spec.n_experiments;
    sim.n_times = cfg.n_times;
    sim.dt_fine = cfg.dt_fine;
    sim.subsample = cfg.subsample;
    sim.seed = spec.seed;
    sim.threads = cfg.threads;
    const auto t0 = clock::now();
    ParticleDataset data = simulate(model, init, sim);
    if (spec.eps > 0.0) data = add_extrinsic_noise(data, spec.eps, spec.seed);
    const auto t1 = clock::now();
    CellResult result = identify_dataset(cfg, spec, data);
    result.walltime_sim = std::chrono::duration<double>(t1 - t0).count();
    return result;
  } catch (const std::exception& e) {
    CellResult result;
    result.spec = spec;
    result.error = e.what();
    return result;
  }
}

inline std::vector<CellResult> run_sweep(const ExperimentConfig& cfg) {
  const std::vector<CellSpec> cells = make_cells(cfg);
  std::vector<CellResult> results;
  results.reserve(cells.size());
  for (const CellSpec& spec : cells) results.push_back(run_cell(cfg, spec));
  return results;
}

}  // namespace wsindy
