#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "wsindy/grid.hpp"
#include "wsindy/library.hpp"
#include "wsindy/types.hpp"

namespace wsindy {

// Support recovery score TP / (TP + FN + FP) with exact-zero support
// semantics: a coefficient is in the support iff it is not exactly zero.
// Equals 1 iff the supports match, and penalizes false positives as hard as
// false negatives.
inline double tpr(const Eigen::VectorXd& w_est, const Eigen::VectorXd& w_true) {
  if (w_est.size() != w_true.size()) throw std::invalid_argument("tpr: size mismatch");
  int tp = 0, fp = 0, fn = 0;
  for (Eigen::Index j = 0; j < w_est.size(); ++j) {
    const bool e = w_est[j] != 0.0;
    const bool t = w_true[j] != 0.0;
    tp += e && t;
    fp += e && !t;
    fn += !e && t;
  }
  const int denom = tp + fp + fn;
  if (denom == 0) throw std::invalid_argument("tpr: both supports are empty");
  return static_cast<double>(tp) / denom;
}

// Same score restricted to the drift part of the dictionary (interaction and
// local-drift blocks), ignoring diffusion columns.
inline double tpr_drift(const Eigen::VectorXd& w_est, const Eigen::VectorXd& w_true,
                        const TrialLibrary& lib) {
  if (w_est.size() != lib.size() || w_true.size() != lib.size()) {
    throw std::invalid_argument("tpr_drift: size mismatch");
  }
  const int cut = lib.sigma_offset();
  int tp = 0, fp = 0, fn = 0;
  for (int j = 0; j < cut; ++j) {
    const bool e = w_est[j] != 0.0;
    const bool t = w_true[j] != 0.0;
    tp += e && t;
    fp += e && !t;
    fn += !e && t;
  }
  const int denom = tp + fp + fn;
  if (denom == 0) throw std::invalid_argument("tpr_drift: both drift supports are empty");
  return static_cast<double>(tp) / denom;
}

// Relative L2 errors of the reconstructed model functions against the ones the
// true coefficients produce through the same dictionary:
//   kernel : grad K on the pairwise offset lattice (2 n_a - 1 per axis),
//   drift  : grad V (candidate velocities) on the grid centers,
//   sigma  : sigma sigma^T entries on the grid centers.
// A block with both functions identically zero scores 0.
struct FunctionErrors {
  double kernel = 0.0;
  double drift = 0.0;
  double sigma = 0.0;
};

namespace detail {

inline double rel_l2(const std::vector<double>& est, const std::vector<double>& tru) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double d = est[i] - tru[i];
    num += d * d;
    den += tru[i] * tru[i];
  }
  if (den == 0.0) {
    return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return std::sqrt(num / den);
}

}  // namespace detail

inline FunctionErrors function_errors(const Eigen::VectorXd& w_est,
                                      const Eigen::VectorXd& w_true,
                                      const TrialLibrary& lib, const Grid& grid) {
  if (w_est.size() != lib.size() || w_true.size() != lib.size()) {
    throw std::invalid_argument("function_errors: size mismatch");
  }
  if (lib.dim != grid.dim) throw std::invalid_argument("function_errors: dimension mismatch");
  for (Eigen::Index j = 0; j < w_est.size(); ++j) {
    if ((w_est[j] != 0.0) != (w_true[j] != 0.0)) {
      throw std::logic_error(
          "function_errors: supports differ; errors are defined only for a correctly "
          "identified support");
    }
  }
  FunctionErrors errs;

  // interaction kernel gradient on the offset lattice
  {
    const int t0 = 2 * grid.n[0] - 1;
    const int t1 = grid.dim == 2 ? 2 * grid.n[1] - 1 : 1;
    const std::size_t count = static_cast<std::size_t>(t0) * t1 * grid.dim;
    std::vector<double> est(count, 0.0), tru(count, 0.0);
    for (std::size_t j = 0; j < lib.kernel_terms.size(); ++j) {
      const int col = lib.kernel_offset() + static_cast<int>(j);
      if (w_est[col] == 0.0 && w_true[col] == 0.0) continue;
      const KernelTables kt = tabulate_kernel(lib.kernel_terms[j], grid);
      for (int a = 0; a < grid.dim; ++a) {
        const std::size_t base = static_cast<std::size_t>(a) * t0 * t1;
        for (std::size_t c = 0; c < kt.comp[a].size(); ++c) {
          est[base + c] += w_est[col] * kt.comp[a][c];
          tru[base + c] += w_true[col] * kt.comp[a][c];
        }
      }
    }
    errs.kernel = detail::rel_l2(est, tru);
  }

  const int cells = grid.cells();
  const int n1 = grid.dim == 2 ? grid.n[1] : 1;
  auto center_of = [&](int c) {
    VecD x{grid.center(0, grid.dim == 2 ? c / n1 : c), 0.0};
    if (grid.dim == 2) x[1] = grid.center(1, c % n1);
    return x;
  };

  // local drift velocity on the grid centers
  {
    std::vector<double> est(static_cast<std::size_t>(cells) * grid.dim, 0.0), tru = est;
    for (std::size_t j = 0; j < lib.drift_terms.size(); ++j) {
      const int col = lib.drift_offset() + static_cast<int>(j);
      if (w_est[col] == 0.0 && w_true[col] == 0.0) continue;
      for (int c = 0; c < cells; ++c) {
        const VecD v = lib.drift_terms[j].velocity(center_of(c));
        for (int a = 0; a < grid.dim; ++a) {
          est[static_cast<std::size_t>(a) * cells + c] += w_est[col] * v[a];
          tru[static_cast<std::size_t>(a) * cells + c] += w_true[col] * v[a];
        }
      }
    }
    errs.drift = detail::rel_l2(est, tru);
  }

  // diffusion matrix entries on the grid centers
  {
    const std::size_t per = static_cast<std::size_t>(cells);
    std::vector<double> est(per * grid.dim * grid.dim, 0.0), tru = est;
    for (std::size_t j = 0; j < lib.sigma_terms.size(); ++j) {
      const int col = lib.sigma_offset() + static_cast<int>(j);
      if (w_est[col] == 0.0 && w_true[col] == 0.0) continue;
      for (const SigmaTerm::Entry& e : lib.sigma_terms[j].entries) {
        const std::size_t base = (static_cast<std::size_t>(e.p) * grid.dim + e.q) * per;
        for (int c = 0; c < cells; ++c) {
          const double v = e.value(center_of(c));
          est[base + c] += w_est[col] * v;
          tru[base + c] += w_true[col] * v;
        }
      }
    }
    errs.sigma = detail::rel_l2(est, tru);
  }
  return errs;
}

// Least-squares slope of log(y) against log(x) (convergence-rate estimate).
struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;  // in log10 units
};

inline RateFit rate_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("rate_fit: need at least two matching samples");
  }
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
      throw std::invalid_argument("rate_fit: samples must be positive");
    }
    lx[i] = std::log10(x[i]);
    ly[i] = std::log10(y[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(lx.size());
  my /= static_cast<double>(ly.size());
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("rate_fit: abscissae are all equal");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

}  // namespace wsindy
