// End-to-end acceptance checks for the identification pipeline.  Each check
// prints one PASS/FAIL line with the measured quantity and its pinned bound;
// the process exit code is the number of failed checks.
//
// The statistical checks (A5-A9) run full simulate-identify cells at fixed
// seeds, so they are deterministic but take tens of minutes in total.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "wsindy/wsindy.hpp"

namespace {

using namespace wsindy;

constexpr std::uint64_t kMasterSeed = 20260819;

std::string strf(const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  return buf;
}

struct Outcome {
  bool ok = false;
  std::string detail;
};

int uniform_below(RngStream& rng, int n) {
  const int k = static_cast<int>(rng.uniform() * n);
  return std::min(n - 1, k);
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// max |a - b| / max |b|
double rel_inf(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return den > 0.0 ? num / den : num;
}

ExperimentConfig make_config(const std::string& preset, const std::string& mode) {
  ExperimentConfig cfg;
  cfg.preset = preset;
  cfg.sigma_mode = mode;
  cfg.seed = kMasterSeed;
  return resolve_config(cfg);
}

// Runs `trials` independent simulate-identify cells at one sweep point, with
// the same seed derivation the sweep driver uses.
std::vector<CellResult> run_batch(const ExperimentConfig& cfg, const std::string& mode,
                                  int n, int m, double eps, int trials) {
  std::vector<CellResult> out;
  out.reserve(static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) {
    CellSpec spec;
    spec.preset = cfg.preset;
    spec.sigma_mode = mode;
    spec.n_particles = n;
    spec.n_experiments = m;
    spec.eps = eps;
    spec.trial = t;
    spec.seed = cell_seed(cfg.seed, cfg.preset, mode, n, m, eps, t);
    out.push_back(run_cell(cfg, spec));
  }
  return out;
}

std::string first_error(const std::vector<CellResult>& cells) {
  for (const CellResult& c : cells) {
    if (!c.error.empty()) return c.error;
  }
  return "";
}

// ---------------------------------------------------------------------------
// A1: FFT convolution against the direct double sum, and the separable
// low-rank kernel path against the dense spectrum path.
// ---------------------------------------------------------------------------

Outcome check_convolution() {
  RngStream rng(101);

  Grid g1;
  g1.dim = 1;
  g1.h = 0.1;
  g1.origin = {-3.2, 0.0};
  g1.n = {64, 1};
  std::vector<double> table1(2 * 64 - 1), u1(64);
  for (double& v : table1) v = 2.0 * rng.uniform() - 1.0;
  for (double& v : u1) v = rng.uniform();
  std::vector<double> direct1(64, 0.0);
  for (int c = 0; c < 64; ++c) {
    double s = 0.0;
    for (int cp = 0; cp < 64; ++cp) s += table1[c - cp + 63] * u1[cp];
    direct1[c] = s * g1.h;
  }
  const std::vector<double> fast1 = convolve(low_rank(table1, g1), u1, g1);
  const double err1 = rel_inf(fast1, direct1);

  Grid g2;
  g2.dim = 2;
  g2.h = 0.2;
  g2.origin = {-3.2, -3.2};
  g2.n = {32, 32};
  const int tn = 2 * 32 - 1;
  std::vector<double> table2(static_cast<std::size_t>(tn) * tn), u2(32 * 32);
  for (double& v : table2) v = 2.0 * rng.uniform() - 1.0;
  for (double& v : u2) v = rng.uniform();
  std::vector<double> direct2(32 * 32, 0.0);
  for (int c0 = 0; c0 < 32; ++c0) {
    for (int c1 = 0; c1 < 32; ++c1) {
      double s = 0.0;
      for (int p0 = 0; p0 < 32; ++p0) {
        for (int p1 = 0; p1 < 32; ++p1) {
          s += table2[static_cast<std::size_t>(c0 - p0 + 31) * tn + (c1 - p1 + 31)] *
               u2[static_cast<std::size_t>(p0) * 32 + p1];
        }
      }
      direct2[static_cast<std::size_t>(c0) * 32 + c1] = s * g2.cell_volume();
    }
  }
  ConvolutionEngine engine(g2);
  const Spectrum dense_spec = engine.transform_dense(table2);
  engine.set_slice(u2);
  const std::vector<double> fast2 = engine.apply(dense_spec);
  const double err2 = rel_inf(fast2, direct2);

  // smooth non-separable kernel: low-rank truncation at 1e-8 against dense
  std::vector<double> smooth(static_cast<std::size_t>(tn) * tn);
  for (int i = 0; i < tn; ++i) {
    for (int j = 0; j < tn; ++j) {
      const double dx = (i - 31) * g2.h;
      const double dy = (j - 31) * g2.h;
      smooth[static_cast<std::size_t>(i) * tn + j] =
          std::exp(-0.15 * (dx * dx + dy * dy)) * std::cos(0.7 * dx + 0.3 * dy) +
          0.3 * std::exp(-0.05 * (dx - dy) * (dx - dy));
    }
  }
  const Spectrum smooth_dense = engine.transform_dense(smooth);
  const LowRankKernel lr = low_rank(smooth, g2);
  const Spectrum smooth_lr = kernel_spectrum(engine, lr);
  engine.set_slice(u2);
  const std::vector<double> out_dense = engine.apply(smooth_dense);
  const std::vector<double> out_lr = engine.apply(smooth_lr);
  const double err3 = rel_inf(out_lr, out_dense);

  const bool ok = err1 <= 1e-10 && err2 <= 1e-10 && err3 <= 1e-8;
  return {ok, strf("fft vs direct 1D %.2e, 2D %.2e (bound 1e-10); rank-%d vs dense %.2e "
                   "(bound 1e-8)",
                   err1, err2, lr.rank(), err3)};
}

// ---------------------------------------------------------------------------
// A2: assembled matrix entries against a direct nested-loop quadrature oracle
// on a small nonlocal 1D instance.
// ---------------------------------------------------------------------------

Outcome check_assembly_oracle() {
  ExperimentConfig cfg = make_config("qanr1d", "const");
  cfg.n_times = 20;
  cfg.bins = 64;
  cfg.basis = {20, 6, 5, 3, 5, 1};

  const IpsModel model = builtin_model("qanr1d", "const");
  SimConfig sim;
  sim.n_particles = 500;
  sim.n_experiments = 1;
  sim.n_times = cfg.n_times;
  sim.dt_fine = cfg.dt_fine;
  sim.subsample = cfg.subsample;
  sim.seed = cell_seed(kMasterSeed, "qanr1d", "const", 500, 1, 0.0, 0);
  const ParticleDataset data = simulate(model, builtin_init("qanr1d"), sim);

  const Grid grid = build_domain(data, cfg.bins, cfg.pooled_std);
  const HistogramField field = density_field(data, grid);
  const TestBasis basis = make_basis(grid, field.times, cfg.basis);
  const TrialLibrary lib = build_library("qanr1d", 0.01);
  const WeakSystem sys = assemble(field, lib, basis);

  const int L = field.n_times();
  const int n = grid.n[0];
  const int mx = basis.phi_x.m;
  const int mt = basis.phi_t.m;
  const double hd = grid.cell_volume();
  const std::vector<int>& q0 = basis.queries.space[0];
  const std::vector<int>& qt = basis.queries.time;
  std::vector<double> wt(static_cast<std::size_t>(L), basis.dt);
  wt.front() *= 0.5;
  wt.back() *= 0.5;

  std::vector<KernelTables> ktabs;
  ktabs.reserve(lib.kernel_terms.size());
  for (const KernelTerm& term : lib.kernel_terms) ktabs.push_back(tabulate_kernel(term, grid));

  auto direct_entry = [&](int row, int col) -> double {
    const int s = sys.rows[static_cast<std::size_t>(row)].space;
    const int ti = sys.rows[static_cast<std::size_t>(row)].time;
    const char block = col < 0 ? 'b' : sys.column_blocks[static_cast<std::size_t>(col)];
    double acc = 0.0;
    for (int l = 0; l < L; ++l) {
      const int o = l - qt[static_cast<std::size_t>(ti)];
      if (o < -mt || o > mt) continue;
      const std::vector<double>& ttab = block == 'b' ? basis.phi_t.d1 : basis.phi_t.val;
      const double tw = wt[static_cast<std::size_t>(l)] * hd * ttab[static_cast<std::size_t>(o + mt)];
      const std::span<const double> u = field.slice(l);
      double space_sum = 0.0;
      for (int o0 = 0; o0 <= 2 * mx; ++o0) {
        const int c = q0[static_cast<std::size_t>(s)] - mx + o0;
        const double x = grid.center(0, c);
        if (block == 'b') {
          space_sum += basis.phi_x.val[static_cast<std::size_t>(o0)] * u[static_cast<std::size_t>(c)];
        } else if (block == 'k') {
          const int j = col - lib.kernel_offset();
          double conv = 0.0;
          for (int cp = 0; cp < n; ++cp) {
            conv += ktabs[static_cast<std::size_t>(j)].comp[0][static_cast<std::size_t>(c - cp + n - 1)] *
                    u[static_cast<std::size_t>(cp)];
          }
          conv *= hd;
          space_sum += basis.phi_x.d1[static_cast<std::size_t>(o0)] * conv * u[static_cast<std::size_t>(c)];
        } else if (block == 'v') {
          const int j = col - lib.drift_offset();
          const double f = lib.drift_terms[static_cast<std::size_t>(j)].velocity({x, 0.0})[0];
          space_sum += basis.phi_x.d1[static_cast<std::size_t>(o0)] * f * u[static_cast<std::size_t>(c)];
        } else {
          const int j = col - lib.sigma_offset();
          double val = 0.0;
          for (const SigmaTerm::Entry& e : lib.sigma_terms[static_cast<std::size_t>(j)].entries) {
            val += e.value({x, 0.0});
          }
          space_sum += basis.phi_x.d2[static_cast<std::size_t>(o0)] * val * u[static_cast<std::size_t>(c)];
        }
      }
      if (block == 's') space_sum *= -0.5;
      acc += tw * space_sum;
    }
    return acc;
  };

  RngStream pick(707);
  const int n_rows = static_cast<int>(sys.G.rows());
  const int J = lib.size();
  std::vector<double> fast, direct;
  for (int i = 0; i < 24; ++i) {
    const int row = uniform_below(pick, n_rows);
    const int col = uniform_below(pick, J);
    fast.push_back(sys.G(row, col));
    direct.push_back(direct_entry(row, col));
  }
  int g_entries = static_cast<int>(fast.size());
  for (int i = 0; i < 8; ++i) {
    const int row = uniform_below(pick, n_rows);
    fast.push_back(sys.b(row));
    direct.push_back(direct_entry(row, -1));
  }

  double scale = 0.0;
  for (double v : direct) scale = std::max(scale, std::abs(v));
  double worst = 0.0;
  for (std::size_t i = 0; i < fast.size(); ++i) {
    const double den = std::max(std::abs(direct[i]), 1e-12 * scale);
    worst = std::max(worst, std::abs(fast[i] - direct[i]) / den);
  }
  const bool ok = worst <= 1e-8;
  return {ok, strf("%d matrix + %d rhs entries vs nested-loop quadrature: max rel err %.2e "
                   "(bound 1e-8)",
                   g_entries, static_cast<int>(fast.size()) - g_entries, worst)};
}

// ---------------------------------------------------------------------------
// A3: sparse solver against a pseudoinverse reference at threshold zero and an
// exhaustive support search on random synthetic systems.
// ---------------------------------------------------------------------------

Outcome check_solver_oracle() {
  RngStream rng(4242);
  const int rows = 200;
  const int J = 6;

  auto random_system = [&](Eigen::MatrixXd& G, Eigen::VectorXd& w_true, Eigen::VectorXd& b) {
    G.resize(rows, J);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < J; ++j) G(i, j) = rng.normal();
    }
    w_true = Eigen::VectorXd::Zero(J);
    const int k = 1 + uniform_below(rng, 3);
    std::vector<int> cols(J);
    for (int j = 0; j < J; ++j) cols[static_cast<std::size_t>(j)] = j;
    for (int j = 0; j < k; ++j) {
      const int pick = j + uniform_below(rng, J - j);
      std::swap(cols[static_cast<std::size_t>(j)], cols[static_cast<std::size_t>(pick)]);
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      w_true[cols[static_cast<std::size_t>(j)]] = sign * (0.5 + 1.5 * rng.uniform());
    }
    b = G * w_true;
    const double rms = b.norm() / std::sqrt(static_cast<double>(rows));
    for (int i = 0; i < rows; ++i) b[i] += 1e-3 * rms * rng.normal();
  };

  Eigen::MatrixXd G;
  Eigen::VectorXd w_true, b;
  random_system(G, w_true, b);
  const Eigen::VectorXd w_zero = mstls_at(G, b, 0.0).coeffs;
  Eigen::JacobiSVD<Eigen::MatrixXd> jac(G, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd w_ref = jac.solve(b);
  const double pinv_err = (w_zero - w_ref).norm() / w_ref.norm();

  int matches = 0;
  const int systems = 50;
  for (int sysi = 0; sysi < systems; ++sysi) {
    random_system(G, w_true, b);
    const SparseSolution sol = mstls(G, b);

    const Eigen::VectorXd w0 = least_squares(G, b);
    const double gw0 = (G * w0).norm();
    auto loss_of = [&](const std::vector<int>& support) -> double {
      if (support.empty()) return 1.0;
      const Eigen::VectorXd w = least_squares(G, b, support);
      return (G * (w - w0)).norm() / gw0 +
             static_cast<double>(support.size()) / static_cast<double>(J);
    };
    double best = 1.0;  // empty support
    std::vector<int> best_support;
    for (int mask = 1; mask < (1 << J); ++mask) {
      std::vector<int> support;
      for (int j = 0; j < J; ++j) {
        if (mask & (1 << j)) support.push_back(j);
      }
      const double loss = loss_of(support);
      if (loss < best) {
        best = loss;
        best_support = support;
      }
    }
    if (sol.support == best_support || loss_of(sol.support) <= best + 1e-12) ++matches;
  }

  const bool ok = pinv_err <= 1e-10 && matches >= 45;
  return {ok, strf("threshold-zero vs pseudoinverse rel err %.2e (bound 1e-10); exhaustive "
                   "support match %d/%d (need >=45)",
                   pinv_err, matches, systems)};
}

// ---------------------------------------------------------------------------
// A4: weak integrals of a histogram density: RMSE bound over repeated draws
// and the exact midpoint identity.
// ---------------------------------------------------------------------------

Outcome check_weak_integral_bound() {
  const double r = 0.5;
  auto psi = [r](double x) {
    const double u = x / r;
    const double t = 1.0 - u * u;
    return t > 0.0 ? t * t * t : 0.0;
  };
  // max |psi'| = 192 / (25 sqrt 5) > max |psi| = 1
  const double c1_norm = 192.0 / (25.0 * std::sqrt(5.0));
  const double exact = 8.0 / 35.0;  // integral of psi against the uniform density on [-1, 1]

  struct Case {
    int n_particles;
    double h;
  };
  const Case cases[] = {{1000, 0.05}, {10000, 0.02}};

  std::string detail;
  bool ok = true;
  int case_idx = 0;
  for (const Case& cs : cases) {
    Grid grid;
    grid.dim = 1;
    grid.h = cs.h;
    grid.origin = {-1.0, 0.0};
    grid.n = {static_cast<int>(std::lround(2.0 / cs.h)), 1};

    std::vector<double> psi_c(static_cast<std::size_t>(grid.n[0]));
    for (int c = 0; c < grid.n[0]; ++c) psi_c[static_cast<std::size_t>(c)] = psi(grid.center(0, c));

    const int draws = 200;
    double sq_sum = 0.0;
    double mid_gap = 0.0;
    std::vector<double> pos(static_cast<std::size_t>(cs.n_particles));
    for (int d = 0; d < draws; ++d) {
      RngStream rng(kMasterSeed + 1000 * (case_idx + 1) + d);
      for (double& p : pos) p = -1.0 + 2.0 * rng.uniform();
      const std::vector<double> u = histogram(pos, cs.n_particles, grid);
      double integral = 0.0;
      for (int c = 0; c < grid.n[0]; ++c) integral += psi_c[static_cast<std::size_t>(c)] * u[static_cast<std::size_t>(c)];
      integral *= grid.h;
      const double err = integral - exact;
      sq_sum += err * err;
      if (d == 0) {
        double by_particle = 0.0;
        for (double p : pos) {
          const int c = grid.cell_of(&p);
          by_particle += psi_c[static_cast<std::size_t>(c)];
        }
        by_particle /= static_cast<double>(cs.n_particles);
        mid_gap = std::abs(integral - by_particle);
      }
    }
    const double rmse = std::sqrt(sq_sum / draws);
    const double bound =
        c1_norm * (0.5 * cs.h + 1.0 / std::sqrt(static_cast<double>(cs.n_particles)));
    const bool case_ok = rmse <= bound && mid_gap <= 1e-12;
    ok = ok && case_ok;
    detail += strf("%sN=%d h=%.2f: rmse %.3e <= %.3e, midpoint gap %.1e", case_idx ? "; " : "",
                   cs.n_particles, cs.h, rmse, bound, mid_gap);
    ++case_idx;
  }
  return {ok, detail + " (midpoint bound 1e-12)"};
}

// ---------------------------------------------------------------------------
// A5: nonlocal 1D model with constant diffusion at 16k total particles.
// ---------------------------------------------------------------------------

Outcome check_qanr_const() {
  const ExperimentConfig cfg = make_config("qanr1d", "const");
  const std::vector<CellResult> cells = run_batch(cfg, "const", 2000, 8, 0.0, 10);
  const std::string err = first_error(cells);
  if (!err.empty()) return {false, "cell failed: " + err};

  int identified = 0;
  std::vector<double> err_k, err_s;
  for (const CellResult& c : cells) {
    if (c.identified) {
      ++identified;
      err_k.push_back(c.errors.kernel);
      err_s.push_back(c.errors.sigma);
    }
  }
  const double med_k = median(err_k);
  const double med_s = median(err_s);
  const bool ok = identified >= 9 && med_k < 0.015 && med_s < 0.015;
  return {ok, strf("identified %d/10 (need >=9); median kernel err %.4f, diffusion err %.4f "
                   "(bound 0.015 at 16k samples, coarse bound 0.03)",
                   identified, med_k, med_s)};
}

// ---------------------------------------------------------------------------
// A6: kernel error decays with particle count at the expected square-root-type
// rate.
// ---------------------------------------------------------------------------

Outcome check_convergence_rate() {
  const ExperimentConfig cfg = make_config("qanr1d", "const");
  const std::vector<int> ns = {1000, 2000, 4000, 8000};
  std::vector<double> xs, ys;
  std::string per_n;
  for (int n : ns) {
    const std::vector<CellResult> cells = run_batch(cfg, "const", n, 2, 0.0, 10);
    const std::string err = first_error(cells);
    if (!err.empty()) return {false, "cell failed: " + err};
    std::vector<double> errs;
    for (const CellResult& c : cells) {
      if (c.identified) errs.push_back(c.errors.kernel);
    }
    if (errs.empty()) return {false, strf("no identified trials at N=%d", n)};
    xs.push_back(static_cast<double>(n));
    ys.push_back(mean(errs));
    per_n += strf("%s%d:%.4f", per_n.empty() ? "" : " ", n, ys.back());
  }
  const RateFit fit = rate_fit(xs, ys);
  const bool ok = fit.slope >= -0.70 && fit.slope <= -0.30;
  return {ok, strf("mean kernel err by N {%s}; log-log slope %.3f (bound [-0.70, -0.30])",
                   per_n.c_str(), fit.slope)};
}

// ---------------------------------------------------------------------------
// A7: measurement noise on the deterministic nonlocal 1D model: small noise
// leaves the model identifiable, large noise surfaces as an effective
// diffusion of the predicted size.
// ---------------------------------------------------------------------------

Outcome check_extrinsic_noise() {
  const ExperimentConfig cfg = make_config("qanr1d", "none");

  const std::vector<CellResult> low = run_batch(cfg, "none", 2000, 8, 0.1, 10);
  std::string err = first_error(low);
  if (!err.empty()) return {false, "cell failed: " + err};
  int low_good = 0;
  for (const CellResult& c : low) {
    if (c.identified && c.errors.kernel < 0.01) ++low_good;
  }

  const std::vector<CellResult> high = run_batch(cfg, "none", 2000, 8, 0.316, 10);
  err = first_error(high);
  if (!err.empty()) return {false, "cell failed: " + err};
  int drift_good = 0;
  std::vector<double> nus;
  for (const CellResult& c : high) {
    if (c.tpr_drift == 1.0) ++drift_good;
    for (std::size_t j = 0; j < c.descriptors.size(); ++j) {
      if (c.descriptors[j] == "s:x^0" && c.coeffs[static_cast<Eigen::Index>(j)] != 0.0) {
        // diffusion-matrix coefficient 2 nu for noise scale nu
        nus.push_back(0.5 * c.coeffs[static_cast<Eigen::Index>(j)]);
      }
    }
  }
  const double target = 0.5 * 0.316 * 0.316;
  double nu_ratio = 0.0;
  if (!nus.empty()) nu_ratio = std::abs(median(nus) - target) / target;

  const bool ok = low_good >= 9 && drift_good >= 8 && (nus.empty() || nu_ratio < 0.5);
  return {ok, strf("eps=0.1: identified with kernel err <1%% in %d/10 (need >=9); eps=0.316: "
                   "drift support exact in %d/10 (need >=8), effective diffusion in %d trials, "
                   "median offset %.2f from eps^2/2 (bound 0.5)",
                   low_good, drift_good, static_cast<int>(nus.size()), nu_ratio)};
}

// ---------------------------------------------------------------------------
// A8: oscillatory 2D diffusivity: fast oscillation homogenizes to the harmonic
// cell average, slow oscillation is recovered term by term.
// ---------------------------------------------------------------------------

Outcome check_homogenization() {
  const ExperimentConfig cfg = make_config("cos2d", "w20");

  CellSpec spec;
  spec.preset = "cos2d";
  spec.sigma_mode = "w20";
  spec.n_particles = 16384;
  spec.n_experiments = 1;
  spec.eps = 0.0;
  spec.trial = 0;
  spec.seed = cell_seed(cfg.seed, "cos2d", "w20", 16384, 1, 0.0, 0);
  const CellResult fast = run_cell(cfg, spec);
  if (!fast.error.empty()) return {false, "cell failed: " + fast.error};

  double sig_ratio = std::numeric_limits<double>::infinity();
  double sig_hat = 0.0, sig_true = 0.0;
  for (std::size_t j = 0; j < fast.descriptors.size(); ++j) {
    if (fast.descriptors[j] == "s:cos(0x)cos(0y)") {
      const double c_hat = fast.coeffs[static_cast<Eigen::Index>(j)];
      const double c_true = fast.w_true[static_cast<Eigen::Index>(j)];
      if (c_hat > 0.0 && c_true > 0.0) {
        sig_hat = std::sqrt(c_hat);
        sig_true = std::sqrt(c_true);
        sig_ratio = std::abs(sig_hat - sig_true) / sig_true;
      }
    }
  }

  const ExperimentConfig cfg_slow = make_config("cos2d", "w1");
  const std::vector<CellResult> slow = run_batch(cfg_slow, "w1", 16384, 1, 0.0, 10);
  const std::string err = first_error(slow);
  if (!err.empty()) return {false, "cell failed: " + err};
  int slow_good = 0;
  for (const CellResult& c : slow) {
    if (c.identified) ++slow_good;
  }

  const bool ok = fast.identified && sig_ratio < 0.05 && slow_good >= 8;
  return {ok, strf("w=20: identified=%d, sigma %.4f vs homogenized %.4f, rel gap %.4f "
                   "(bound 0.05); w=1: identified %d/10 (need >=8)",
                   fast.identified ? 1 : 0, sig_hat, sig_true, sig_ratio, slow_good)};
}

// ---------------------------------------------------------------------------
// A9: 2D aggregation model with critical constant diffusion at 16k total
// particles.
// ---------------------------------------------------------------------------

Outcome check_aggregation() {
  const ExperimentConfig cfg = make_config("log2d", "critical");
  const std::vector<CellResult> cells = run_batch(cfg, "critical", 2000, 8, 0.0, 10);
  const std::string err = first_error(cells);
  if (!err.empty()) return {false, "cell failed: " + err};
  std::vector<double> tprs;
  for (const CellResult& c : cells) tprs.push_back(c.tpr);
  const double avg = mean(tprs);
  const bool ok = avg >= 0.95;
  return {ok, strf("mean support recovery %.3f over 10 trials (need >=0.95)", avg)};
}

// ---------------------------------------------------------------------------
// A10 + S1 + S2: identification walltime, deterministic residual of the true
// coefficients, and conditioning of the regression matrix.
// ---------------------------------------------------------------------------

CellResult g_big_cell;  // shared between the walltime and conditioning checks

Outcome check_walltime() {
  const ExperimentConfig cfg = make_config("qanr1d", "const");
  CellSpec spec;
  spec.preset = "qanr1d";
  spec.sigma_mode = "const";
  spec.n_particles = 8000;
  spec.n_experiments = 8;
  spec.eps = 0.0;
  spec.trial = 0;
  spec.seed = cell_seed(cfg.seed, "qanr1d", "const", 8000, 8, 0.0, 0);
  g_big_cell = run_cell(cfg, spec);
  if (!g_big_cell.error.empty()) return {false, "cell failed: " + g_big_cell.error};
  const double ident = g_big_cell.walltime_assemble + g_big_cell.walltime_solve;
  const bool ok = ident < 60.0;
  return {ok, strf("histogram-through-solve walltime %.2f s at 64000 total particles "
                   "(bound 60 s; simulation excluded)",
                   ident)};
}

Outcome check_true_residual() {
  const ExperimentConfig cfg = make_config("qanr1d", "none");
  const IpsModel model = builtin_model("qanr1d", "none");
  SimConfig sim;
  sim.n_particles = 8000;
  sim.n_experiments = 1;
  sim.n_times = cfg.n_times;
  sim.dt_fine = cfg.dt_fine;
  sim.subsample = cfg.subsample;
  sim.seed = cell_seed(kMasterSeed, "qanr1d", "none", 8000, 1, 0.0, 0);
  const ParticleDataset data = simulate(model, builtin_init("qanr1d"), sim);

  const Grid grid = build_domain(data, cfg.bins, cfg.pooled_std);
  const HistogramField field = density_field(data, grid);
  const TestBasis basis = make_basis(grid, field.times, cfg.basis);
  const TrialLibrary lib = build_library("qanr1d", 0.01);
  const WeakSystem sys = assemble(field, lib, basis);
  const Eigen::VectorXd w_star = align_true_coeffs(lib, model.true_terms);
  const double res = (sys.G * w_star - sys.b).norm() / sys.b.norm();
  const bool ok = res <= 0.05;
  return {ok, strf("deterministic run, true-coefficient residual %.4f (bound 0.05)", res)};
}

// The weak system is expected to be severely ill-conditioned (trial columns
// overlap heavily), which is why the solver thresholds on normalized
// coefficients; but it must stay far enough from singular that the double
// precision SVD is meaningful.
Outcome check_conditioning() {
  if (!g_big_cell.error.empty() || g_big_cell.descriptors.empty()) {
    return {false, "walltime cell unavailable"};
  }
  const double kappa = g_big_cell.kappa;
  const bool ok = kappa >= 1e5 && kappa <= 1e12;
  return {ok, strf("regression matrix condition number %.3e (bound [1e5, 1e12])", kappa)};
}

}  // namespace

// With no arguments every check runs; otherwise arguments select checks by
// prefix of the printed name (e.g. `acceptance_tests A5 A7`).
int main(int argc, char** argv) {
  std::printf("acceptance checks: weak-form identification of interacting particle models\n");
  int failures = 0;
  int total = 0;
  auto selected = [&](const char* name) {
    if (argc < 2) return true;
    for (int i = 1; i < argc; ++i) {
      if (std::string(name).rfind(argv[i], 0) == 0) return true;
    }
    return false;
  };
  auto run = [&](const char* name, const std::function<Outcome()>& fn) {
    if (!selected(name)) return;
    ++total;
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      out = fn();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %s: %s [%.1f s]\n", out.ok ? "PASS" : "FAIL", name, out.detail.c_str(),
                secs);
    std::fflush(stdout);
    if (!out.ok) ++failures;
  };

  run("A1  convolution oracle", check_convolution);
  run("A2  assembly oracle", check_assembly_oracle);
  run("A3  solver oracle", check_solver_oracle);
  run("A4  weak integral bound", check_weak_integral_bound);
  run("A5  constant diffusion recovery", check_qanr_const);
  run("A6  convergence rate", check_convergence_rate);
  run("A7  measurement noise", check_extrinsic_noise);
  run("A8  homogenized diffusivity", check_homogenization);
  run("A9  aggregation recovery", check_aggregation);
  run("A10 identification walltime", check_walltime);
  run("S1  true-model residual", check_true_residual);
  run("S2  conditioning", check_conditioning);

  if (failures == 0) {
    std::printf("all %d checks passed\n", total);
  } else {
    std::printf("%d of %d checks FAILED\n", failures, total);
  }
  return failures;
}
