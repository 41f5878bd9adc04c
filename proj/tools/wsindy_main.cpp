// Command-line driver: simulate interacting-particle datasets, identify
// mean-field dynamics from them, and run full scoring sweeps.

#include <CLI11.hpp>

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <wsindy/wsindy.hpp>

namespace {

struct Overrides {
  std::optional<std::string> config;
  std::optional<std::string> preset;
  std::optional<std::string> sigma_mode;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<int> threads;
  std::optional<std::string> outdir;
  std::optional<std::vector<int>> n_particles;
  std::optional<std::vector<int>> n_experiments;
  std::optional<std::vector<double>> noise_eps;
  std::optional<std::vector<std::string>> sigma_modes;
  std::optional<int> n_times;
  std::optional<double> dt_fine;
  std::optional<int> subsample;
  std::optional<int> bins;
  std::optional<bool> pooled_std;
  std::optional<int> m_x, m_t, p_x, p_t, s_x, s_t;
  std::optional<double> lambda_min_exp, lambda_max_exp;
  std::optional<int> lambda_count;
};

void add_common_options(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--config", ov.config, "INI-style configuration file");
  cmd->add_option("--preset", ov.preset, "model preset: qanr1d, cos2d, log2d");
  cmd->add_option("--sigma-mode", ov.sigma_mode, "diffusion mode of the preset");
  cmd->add_option("--seed", ov.seed, "master seed");
  cmd->add_option("--trials", ov.trials, "independent trials per sweep cell");
  cmd->add_option("--threads", ov.threads, "simulation worker threads");
  cmd->add_option("--outdir", ov.outdir, "output directory");
  cmd->add_option("--n", ov.n_particles, "particle counts (comma separated)")
      ->delimiter(',');
  cmd->add_option("--m", ov.n_experiments, "experiment counts (comma separated)")
      ->delimiter(',');
  cmd->add_option("--eps", ov.noise_eps, "extrinsic noise levels (comma separated)")
      ->delimiter(',');
  cmd->add_option("--sigma-modes", ov.sigma_modes, "sweep over diffusion modes")
      ->delimiter(',');
  cmd->add_option("--n-times", ov.n_times, "recorded snapshots per trajectory");
  cmd->add_option("--dt-fine", ov.dt_fine, "fine integrator step");
  cmd->add_option("--subsample", ov.subsample, "fine steps per recorded snapshot");
  cmd->add_option("--bins", ov.bins, "histogram bins per dimension");
  cmd->add_option("--pooled-std", ov.pooled_std,
                  "pool the spread estimate across dimensions");
  cmd->add_option("--m-x", ov.m_x, "test function spatial half-width (cells)");
  cmd->add_option("--m-t", ov.m_t, "test function temporal half-width (steps)");
  cmd->add_option("--p-x", ov.p_x, "spatial bump exponent");
  cmd->add_option("--p-t", ov.p_t, "temporal bump exponent");
  cmd->add_option("--s-x", ov.s_x, "spatial query stride");
  cmd->add_option("--s-t", ov.s_t, "temporal query stride");
  cmd->add_option("--lambda-min-exp", ov.lambda_min_exp, "log10 of smallest threshold");
  cmd->add_option("--lambda-max-exp", ov.lambda_max_exp, "log10 of largest threshold");
  cmd->add_option("--lambda-count", ov.lambda_count, "threshold grid size");
}

wsindy::ExperimentConfig build_config(const Overrides& ov) {
  wsindy::ExperimentConfig cfg;
  if (ov.config) cfg = wsindy::parse_config(*ov.config);
  if (ov.preset) cfg.preset = *ov.preset;
  if (ov.sigma_mode) cfg.sigma_mode = *ov.sigma_mode;
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.trials) cfg.trials = *ov.trials;
  if (ov.threads) cfg.threads = *ov.threads;
  if (ov.outdir) cfg.outdir = *ov.outdir;
  if (ov.n_particles) cfg.n_particles = *ov.n_particles;
  if (ov.n_experiments) cfg.n_experiments = *ov.n_experiments;
  if (ov.noise_eps) cfg.noise_eps = *ov.noise_eps;
  if (ov.sigma_modes) cfg.sigma_modes = *ov.sigma_modes;
  if (ov.n_times) cfg.n_times = *ov.n_times;
  if (ov.dt_fine) cfg.dt_fine = *ov.dt_fine;
  if (ov.subsample) cfg.subsample = *ov.subsample;
  if (ov.bins) cfg.bins = *ov.bins;
  if (ov.pooled_std) cfg.pooled_std = *ov.pooled_std;
  if (ov.m_x) cfg.basis.m_x = *ov.m_x;
  if (ov.m_t) cfg.basis.m_t = *ov.m_t;
  if (ov.p_x) cfg.basis.p_x = *ov.p_x;
  if (ov.p_t) cfg.basis.p_t = *ov.p_t;
  if (ov.s_x) cfg.basis.s_x = *ov.s_x;
  if (ov.s_t) cfg.basis.s_t = *ov.s_t;
  if (ov.lambda_min_exp) cfg.lambda_min_exp = *ov.lambda_min_exp;
  if (ov.lambda_max_exp) cfg.lambda_max_exp = *ov.lambda_max_exp;
  if (ov.lambda_count) cfg.lambda_count = *ov.lambda_count;
  return wsindy::resolve_config(cfg);
}

wsindy::CellSpec first_cell(const wsindy::ExperimentConfig& cfg) {
  return wsindy::make_cells(cfg).front();
}

int exit_code(const std::vector<wsindy::CellResult>& results) {
  for (const wsindy::CellResult& r : results) {
    if (!r.error.empty()) return 1;
  }
  return 0;
}

int cmd_simulate(const Overrides& ov, const std::string& out_path) {
  const wsindy::ExperimentConfig cfg = build_config(ov);
  const wsindy::CellSpec spec = first_cell(cfg);
  const wsindy::IpsModel model = wsindy::builtin_model(spec.preset, spec.sigma_mode);
  const wsindy::InitialDistribution init = wsindy::builtin_init(spec.preset);
  wsindy::SimConfig sim;
  sim.n_particles = spec.n_particles;
  sim.n_experiments = spec.n_experiments;
  sim.n_times = cfg.n_times;
  sim.dt_fine = cfg.dt_fine;
  sim.subsample = cfg.subsample;
  sim.seed = spec.seed;
  sim.threads = cfg.threads;
  wsindy::ParticleDataset data = wsindy::simulate(model, init, sim);
  if (spec.eps > 0.0) data = wsindy::add_extrinsic_noise(data, spec.eps, spec.seed);
  wsindy::save_dataset(data, out_path);
  std::cout << "wrote " << out_path << " (" << data.n_experiments << " experiments, "
            << data.n_times << " snapshots, " << data.n_particles << " particles, dim "
            << data.dim << ")\n";
  return 0;
}

int cmd_identify(const Overrides& ov, const std::string& data_path) {
  const wsindy::ExperimentConfig cfg = build_config(ov);
  const wsindy::ParticleDataset data = wsindy::load_dataset(data_path);
  wsindy::CellSpec spec = first_cell(cfg);
  spec.n_particles = data.n_particles;
  spec.n_experiments = data.n_experiments;
  wsindy::CellResult result;
  try {
    result = wsindy::identify_dataset(cfg, spec, data);
  } catch (const std::exception& e) {
    result.spec = spec;
    result.error = e.what();
  }
  const std::vector<wsindy::CellResult> results{result};
  wsindy::write_outputs(cfg, results);
  std::cout << wsindy::format_summary(results);
  return exit_code(results);
}

int cmd_sweep(const Overrides& ov, bool single_cell) {
  const wsindy::ExperimentConfig cfg = build_config(ov);
  if (single_cell && wsindy::make_cells(cfg).size() != 1) {
    std::cerr << "run: the configuration defines more than one sweep cell; use sweep\n";
    return 1;
  }
  const std::vector<wsindy::CellResult> results = wsindy::run_sweep(cfg);
  wsindy::write_outputs(cfg, results);
  std::cout << wsindy::format_summary(results);
  std::cout << "outputs in " << cfg.outdir << "\n";
  return exit_code(results);
}

int cmd_report(const std::string& report_path) {
  std::ifstream in(report_path);
  if (!in) {
    std::cerr << "cannot open " << report_path << "\n";
    return 1;
  }
  nlohmann::json j;
  in >> j;
  std::cout << "version " << j.value("version", std::string("?")) << ", preset "
            << j["config"].value("preset", std::string("?")) << ", "
            << j["library"].value("columns", 0) << " library columns\n";
  int identified = 0, failed = 0;
  for (const auto& cell : j["cells"]) {
    if (cell.contains("error")) {
      ++failed;
      continue;
    }
    identified += cell.value("identified", false) ? 1 : 0;
  }
  std::cout << j["cells"].size() << " cells, " << identified << " identified, " << failed
            << " failed\n";
  for (const auto& cell : j["cells"]) {
    std::cout << "  N=" << cell.value("n_particles", 0)
              << " M=" << cell.value("n_experiments", 0) << " eps=" << cell.value("eps", 0.0)
              << " trial=" << cell.value("trial", 0);
    if (cell.contains("error")) {
      std::cout << "  ERROR: " << cell["error"].get<std::string>() << "\n";
      continue;
    }
    std::cout << "  tpr=" << (cell["tpr"].is_null() ? -1.0 : cell["tpr"].get<double>())
              << " support=[";
    bool sep = false;
    for (const auto& s : cell["support"]) {
      std::cout << (sep ? ", " : "") << s.get<std::string>();
      sep = true;
    }
    std::cout << "]\n";
  }
  return failed > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weak-form identification of mean-field particle dynamics"};
  app.set_version_flag("--version", WSINDY_VERSION);
  app.require_subcommand(1);

  Overrides ov;
  std::string out_path = "dataset.bin";
  std::string data_path;
  std::string report_path;

  CLI::App* sim = app.add_subcommand("simulate", "integrate a particle system and save it");
  add_common_options(sim, ov);
  sim->add_option("--out", out_path, "output dataset file")->required();

  CLI::App* ident =
      app.add_subcommand("identify", "identify dynamics from a saved dataset");
  add_common_options(ident, ov);
  ident->add_option("--data", data_path, "dataset file from the simulate verb")->required();

  CLI::App* run = app.add_subcommand("run", "simulate and identify a single cell");
  add_common_options(run, ov);

  CLI::App* sweep = app.add_subcommand("sweep", "run the full sweep grid");
  add_common_options(sweep, ov);

  CLI::App* report = app.add_subcommand("report", "summarize an existing report.json");
  report->add_option("--report", report_path, "path to report.json")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(ov, out_path);
    if (ident->parsed()) return cmd_identify(ov, data_path);
    if (run->parsed()) return cmd_sweep(ov, true);
    if (sweep->parsed()) return cmd_sweep(ov, false);
    if (report->parsed()) return cmd_report(report_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
