#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "wsindy/experiment.hpp"
#include "wsindy/metrics.hpp"

namespace wsindy {

inline constexpr const char* kVersion = "0.1.0";

namespace detail {

// %.10g rendering shared by the CSV writers; keeps reruns byte-identical.
inline std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

inline nlohmann::json finite_or_null(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

inline std::string sanitize_csv(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace detail

inline nlohmann::json config_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["preset"] = cfg.preset;
  j["sigma_mode"] = cfg.sigma_mode;
  j["seed"] = std::to_string(cfg.seed);
  j["trials"] = cfg.trials;
  j["threads"] = cfg.threads;
  j["outdir"] = cfg.outdir;
  j["n_particles"] = cfg.n_particles;
  j["n_experiments"] = cfg.n_experiments;
  j["noise_eps"] = cfg.noise_eps;
  j["sigma_modes"] = cfg.sigma_modes;
  j["n_times"] = cfg.n_times;
  j["dt_fine"] = cfg.dt_fine;
  j["subsample"] = cfg.subsample;
  j["bins"] = cfg.bins;
  j["pooled_std"] = cfg.pooled_std;
  j["basis"] = {{"m_x", cfg.basis.m_x}, {"m_t", cfg.basis.m_t}, {"p_x", cfg.basis.p_x},
                {"p_t", cfg.basis.p_t}, {"s_x", cfg.basis.s_x}, {"s_t", cfg.basis.s_t}};
  j["mstls"] = {{"lambda_min_exp", cfg.lambda_min_exp},
                {"lambda_max_exp", cfg.lambda_max_exp},
                {"lambda_count", cfg.lambda_count}};
  return j;
}

inline nlohmann::json cell_json(const CellResult& r) {
  nlohmann::json j;
  j["preset"] = r.spec.preset;
  j["sigma_mode"] = r.spec.sigma_mode;
  j["n_particles"] = r.spec.n_particles;
  j["n_experiments"] = r.spec.n_experiments;
  j["eps"] = r.spec.eps;
  j["trial"] = r.spec.trial;
  j["seed"] = std::to_string(r.spec.seed);
  if (!r.error.empty()) {
    j["error"] = r.error;
    return j;
  }
  j["identified"] = r.identified;
  j["tpr"] = detail::finite_or_null(r.tpr);
  j["tpr_drift"] = detail::finite_or_null(r.tpr_drift);
  j["errors"] = {{"kernel", detail::finite_or_null(r.errors.kernel)},
                 {"drift", detail::finite_or_null(r.errors.drift)},
                 {"sigma", detail::finite_or_null(r.errors.sigma)}};
  j["lambda_hat"] = r.lambda_hat;
  j["kappa"] = detail::finite_or_null(r.kappa);
  j["rel_residual"] = detail::finite_or_null(r.rel_residual);
  j["support"] = r.support_descriptors;
  nlohmann::json coeffs = nlohmann::json::object();
  nlohmann::json true_coeffs = nlohmann::json::object();
  for (std::size_t k = 0; k < r.descriptors.size(); ++k) {
    const auto idx = static_cast<Eigen::Index>(k);
    if (r.coeffs.size() > idx && r.coeffs[idx] != 0.0) {
      coeffs[r.descriptors[k]] = r.coeffs[idx];
    }
    if (r.w_true.size() > idx && r.w_true[idx] != 0.0) {
      true_coeffs[r.descriptors[k]] = r.w_true[idx];
    }
  }
  j["coeffs"] = coeffs;
  j["true_coeffs"] = true_coeffs;
  j["loss_curve"] = nlohmann::json::array();
  for (double v : r.loss_curve) j["loss_curve"].push_back(detail::finite_or_null(v));
  j["walltimes"] = {{"sim", r.walltime_sim},
                    {"assemble", r.walltime_assemble},
                    {"solve", r.walltime_solve}};
  return j;
}

// Writes the full study record: configuration echo, library manifest, the
// shared threshold grid, and one entry per sweep cell.  Content is a pure
// function of the configuration (no timestamps), so reruns are byte-stable
// apart from the walltime fields.
inline void write_report(const ExperimentConfig& cfg, const std::vector<CellResult>& results,
                         const std::string& path) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["config"] = config_json(cfg);
  const TrialLibrary lib = build_library(cfg.preset);
  j["library"] = {{"preset", lib.preset},
                  {"dim", lib.dim},
                  {"columns", lib.size()},
                  {"descriptors", lib.descriptors()}};
  j["lambda_grid"] = lambda_grid(cfg);
  j["cells"] = nlohmann::json::array();
  for (const CellResult& r : results) j["cells"].push_back(cell_json(r));
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

// One row per sweep cell.  The walltime columns come last so byte-level
// comparisons can strip them.
inline void write_scores_csv(const std::vector<CellResult>& results, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "preset,sigma_mode,n_particles,n_experiments,eps,trial,seed,identified,"
         "tpr,tpr_drift,err_kernel,err_drift,err_sigma,lambda_hat,kappa,rel_residual,"
         "error,walltime_sim,walltime_assemble,walltime_solve\n";
  for (const CellResult& r : results) {
    out << r.spec.preset << ',' << r.spec.sigma_mode << ',' << r.spec.n_particles << ','
        << r.spec.n_experiments << ',' << detail::num(r.spec.eps) << ',' << r.spec.trial
        << ',' << r.spec.seed << ',' << (r.identified ? 1 : 0) << ','
        << detail::num(r.tpr) << ',' << detail::num(r.tpr_drift) << ','
        << detail::num(r.errors.kernel) << ',' << detail::num(r.errors.drift) << ','
        << detail::num(r.errors.sigma) << ',' << detail::num(r.lambda_hat) << ','
        << detail::num(r.kappa) << ',' << detail::num(r.rel_residual) << ','
        << detail::sanitize_csv(r.error) << ',' << detail::num(r.walltime_sim) << ','
        << detail::num(r.walltime_assemble) << ',' << detail::num(r.walltime_solve)
        << '\n';
  }
}

// Plot-ready summaries: error decay and recovery rate against particle count,
// and the threshold-selection loss curve of the first successful cell.
inline void write_plot_data(const std::vector<CellResult>& results, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  std::map<int, std::vector<const CellResult*>> by_n;
  for (const CellResult& r : results) {
    if (r.error.empty()) by_n[r.spec.n_particles].push_back(&r);
  }

  {
    std::ofstream out(fs::path(dir) / "errors_vs_n.csv");
    std::vector<double> ns, kerr;
    std::string rows;
    for (const auto& [n, cells] : by_n) {
      double ek = 0.0, ev = 0.0, es = 0.0;
      int count = 0;
      for (const CellResult* r : cells) {
        if (!r->identified) continue;
        ek += r->errors.kernel;
        ev += r->errors.drift;
        es += r->errors.sigma;
        ++count;
      }
      if (count == 0) continue;
      ek /= count;
      ev /= count;
      es /= count;
      rows += std::to_string(n) + "," + detail::num(ek) + "," + detail::num(ev) + "," +
              detail::num(es) + "," + std::to_string(count) + "\n";
      if (ek > 0.0) {
        ns.push_back(n);
        kerr.push_back(ek);
      }
    }
    out << "# mean relative errors over identified trials, by particle count\n";
    out << "# reference Monte Carlo rate: slope -0.5 in log-log\n";
    if (ns.size() >= 2) {
      out << "# fitted kernel-error slope: " << detail::num(rate_fit(ns, kerr).slope) << "\n";
    }
    out << "n_particles,err_kernel,err_drift,err_sigma,identified_trials\n" << rows;
  }

  {
    std::ofstream out(fs::path(dir) / "tpr_vs_n.csv");
    out << "n_particles,mean_tpr,frac_identified,trials\n";
    for (const auto& [n, cells] : by_n) {
      double t = 0.0;
      int id = 0;
      for (const CellResult* r : cells) {
        t += r->tpr;
        id += r->identified ? 1 : 0;
      }
      out << n << ',' << detail::num(t / static_cast<double>(cells.size())) << ','
          << detail::num(static_cast<double>(id) / static_cast<double>(cells.size())) << ','
          << cells.size() << '\n';
    }
  }

  for (const CellResult& r : results) {
    if (!r.error.empty() || r.loss_curve.empty()) continue;
    std::ofstream out(fs::path(dir) / "loss_vs_lambda.csv");
    out << "# threshold-selection loss; empty-support levels are inf\n";
    out << "lambda,loss\n";
    for (std::size_t i = 0; i < r.loss_curve.size(); ++i) {
      out << detail::num(r.lambda_grid[i]) << ',' << detail::num(r.loss_curve[i]) << '\n';
    }
    break;
  }
}

// Short human-readable digest of a sweep (CLI output).
inline std::string format_summary(const std::vector<CellResult>& results) {
  std::string s;
  int identified = 0, failed = 0;
  for (const CellResult& r : results) {
    char line[256];
    if (!r.error.empty()) {
      ++failed;
      std::snprintf(line, sizeof(line), "%-8s %-8s N=%-6d M=%-3d eps=%-8g trial=%d  ERROR: %s\n",
                    r.spec.preset.c_str(), r.spec.sigma_mode.c_str(), r.spec.n_particles,
                    r.spec.n_experiments, r.spec.eps, r.spec.trial, r.error.c_str());
      s += line;
      continue;
    }
    identified += r.identified ? 1 : 0;
    std::snprintf(line, sizeof(line),
                  "%-8s %-8s N=%-6d M=%-3d eps=%-8g trial=%d  tpr=%.3f errK=%.3g errV=%.3g "
                  "errS=%.3g lambda=%.3g\n",
                  r.spec.preset.c_str(), r.spec.sigma_mode.c_str(), r.spec.n_particles,
                  r.spec.n_experiments, r.spec.eps, r.spec.trial, r.tpr, r.errors.kernel,
                  r.errors.drift, r.errors.sigma, r.lambda_hat);
    s += line;
  }
  char tail[128];
  std::snprintf(tail, sizeof(tail), "cells: %zu, identified: %d, failed: %d\n",
                results.size(), identified, failed);
  s += tail;
  return s;
}

// Convenience wrapper used by the CLI run/sweep verbs.
inline void write_outputs(const ExperimentConfig& cfg, const std::vector<CellResult>& results) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.outdir);
  write_report(cfg, results, (fs::path(cfg.outdir) / "report.json").string());
  write_scores_csv(results, (fs::path(cfg.outdir) / "scores.csv").string());
  write_plot_data(results, (fs::path(cfg.outdir) / "plotdata").string());
}

}  // namespace wsindy
