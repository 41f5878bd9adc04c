#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wsindy/fft.hpp"
#include "wsindy/grid.hpp"
#include "wsindy/models.hpp"
#include "wsindy/types.hpp"

namespace wsindy {

// Candidate interaction kernel: gradient of a radial potential K(|x|),
// evaluated at pairwise displacement offsets.
struct KernelTerm {
  std::string descriptor;
  std::function<VecD(const VecD&)> grad;
};

// Candidate local drift velocity f(x); the regression target absorbs the
// gradient structure, so candidates are plain vector fields.
struct DriftTerm {
  std::string descriptor;
  std::function<VecD(const VecD&)> velocity;
};

// Candidate diffusion matrix A(x) (models sigma sigma^T).  Only nonzero
// entries of the symmetric matrix are listed.
struct SigmaTerm {
  struct Entry {
    int p = 0;
    int q = 0;
    std::function<double(const VecD&)> value;
  };
  std::string descriptor;
  std::vector<Entry> entries;
};

// Column dictionary for the weak-form regression, grouped in three blocks:
// interaction kernels, local drift velocities, diffusion matrices.  Column
// order is kernel terms, then drift terms, then sigma terms.
struct TrialLibrary {
  std::string preset;
  int dim = 1;
  std::vector<KernelTerm> kernel_terms;
  std::vector<DriftTerm> drift_terms;
  std::vector<SigmaTerm> sigma_terms;

  int size() const {
    return static_cast<int>(kernel_terms.size() + drift_terms.size() + sigma_terms.size());
  }
  int kernel_offset() const { return 0; }
  int drift_offset() const { return static_cast<int>(kernel_terms.size()); }
  int sigma_offset() const {
    return static_cast<int>(kernel_terms.size() + drift_terms.size());
  }

  char block_of(int j) const {
    if (j < 0 || j >= size()) throw std::out_of_range("block_of: column out of range");
    if (j < drift_offset()) return 'k';
    if (j < sigma_offset()) return 'v';
    return 's';
  }

  const std::string& descriptor(int j) const {
    if (j < 0 || j >= size()) throw std::out_of_range("descriptor: column out of range");
    if (j < drift_offset()) return kernel_terms[j].descriptor;
    if (j < sigma_offset()) return drift_terms[j - drift_offset()].descriptor;
    return sigma_terms[j - sigma_offset()].descriptor;
  }

  std::vector<std::string> descriptors() const {
    std::vector<std::string> out;
    out.reserve(size());
    for (int j = 0; j < size(); ++j) out.push_back(descriptor(j));
    return out;
  }

  int index_of(const std::string& desc) const {
    for (int j = 0; j < size(); ++j) {
      if (descriptor(j) == desc) return j;
    }
    return -1;
  }
};

// Places the model's true coefficients into library column order.  Every true
// term must name an existing column and carry a finite value.
inline Eigen::VectorXd align_true_coeffs(const TrialLibrary& lib,
                                         const std::vector<TrueTerm>& terms) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(lib.size());
  for (const TrueTerm& t : terms) {
    const int j = lib.index_of(t.descriptor);
    if (j < 0) {
      throw std::invalid_argument("align_true_coeffs: term '" + t.descriptor +
                                  "' has no column in library '" + lib.preset + "'");
    }
    if (!std::isfinite(t.value)) {
      throw std::invalid_argument("align_true_coeffs: coefficient for '" + t.descriptor +
                                  "' is not finite; fill the placeholder first");
    }
    w[j] = t.value;
  }
  return w;
}

namespace detail {

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// gradient of |x|^m in R^d (m >= 1); the removable singularity at the origin
// is mapped to zero.
inline KernelTerm radial_power_kernel(int m, int dim) {
  KernelTerm term;
  term.descriptor = "k:|x|^" + std::to_string(m);
  if (dim == 1) {
    term.grad = [m](const VecD& x) -> VecD {
      const double a = std::abs(x[0]);
      if (a == 0.0) return {0.0, 0.0};
      return {m * std::pow(a, m - 1) * sgn(x[0]), 0.0};
    };
  } else {
    term.grad = [m](const VecD& x) -> VecD {
      const double r2 = x[0] * x[0] + x[1] * x[1];
      if (r2 == 0.0) return {0.0, 0.0};
      const double s = m * std::pow(std::sqrt(r2), m - 2);
      return {s * x[0], s * x[1]};
    };
  }
  return term;
}

// gradient of the C^1 cutoff extension of a radial potential:
//   K_delta(r) = K(delta) - delta K'(delta) + K'(delta) r  for r < delta,
// so grad K_delta(x) = K'(max(r, delta)) x / r.
inline KernelTerm cutoff_kernel(std::string descriptor,
                                std::function<double(double)> kprime, double delta) {
  KernelTerm term;
  term.descriptor = std::move(descriptor);
  term.grad = [kp = std::move(kprime), delta](const VecD& x) -> VecD {
    const double r2 = x[0] * x[0] + x[1] * x[1];
    if (r2 == 0.0) return {0.0, 0.0};
    const double r = std::sqrt(r2);
    const double s = kp(std::max(r, delta)) / r;
    return {s * x[0], s * x[1]};
  };
  return term;
}

inline TrialLibrary build_qanr1d() {
  TrialLibrary lib;
  lib.preset = "qanr1d";
  lib.dim = 1;
  for (int m = 1; m <= 7; ++m) lib.kernel_terms.push_back(radial_power_kernel(m, 1));
  // drift velocities x^m; m = 1 is excluded (it coincides with the quadratic
  // interaction column under a mean-zero density and would make the dictionary
  // nearly collinear).
  for (int m = 0; m <= 8; ++m) {
    if (m == 1) continue;
    DriftTerm t;
    t.descriptor = "v:x^" + std::to_string(m);
    t.velocity = [m](const VecD& x) -> VecD { return {std::pow(x[0], m), 0.0}; };
    lib.drift_terms.push_back(std::move(t));
  }
  for (int m = 0; m <= 8; ++m) {
    SigmaTerm t;
    t.descriptor = "s:x^" + std::to_string(m);
    t.entries.push_back({0, 0, [m](const VecD& x) { return std::pow(x[0], m); }});
    lib.sigma_terms.push_back(std::move(t));
  }
  return lib;
}

inline TrialLibrary build_cos2d() {
  TrialLibrary lib;
  lib.preset = "cos2d";
  lib.dim = 2;
  for (int m = 1; m <= 7; ++m) lib.kernel_terms.push_back(radial_power_kernel(m, 2));
  // per-coordinate trigonometric drift velocities cos(m x1) cos(n x2) e_i with
  // m + n <= 5
  for (int axis = 0; axis < 2; ++axis) {
    for (int m = 0; m <= 5; ++m) {
      for (int n = 0; n + m <= 5; ++n) {
        DriftTerm t;
        t.descriptor = "v:cos(" + std::to_string(m) + "x)cos(" + std::to_string(n) +
                       "y)@" + (axis == 0 ? "x" : "y");
        t.velocity = [axis, m, n](const VecD& x) -> VecD {
          const double g = std::cos(m * x[0]) * std::cos(n * x[1]);
          VecD v{0.0, 0.0};
          v[axis] = g;
          return v;
        };
        lib.drift_terms.push_back(std::move(t));
      }
    }
  }
  // isotropic diffusion candidates cos(m x1) cos(n x2) I over the full 6x6
  // frequency square
  for (int m = 0; m <= 5; ++m) {
    for (int n = 0; n <= 5; ++n) {
      SigmaTerm t;
      t.descriptor = "s:cos(" + std::to_string(m) + "x)cos(" + std::to_string(n) + "y)";
      auto g = [m, n](const VecD& x) { return std::cos(m * x[0]) * std::cos(n * x[1]); };
      t.entries.push_back({0, 0, g});
      t.entries.push_back({1, 1, g});
      lib.sigma_terms.push_back(std::move(t));
    }
  }
  return lib;
}

inline TrialLibrary build_log2d(double delta) {
  TrialLibrary lib;
  lib.preset = "log2d";
  lib.dim = 2;
  for (int m = 2; m <= 6; ++m) lib.kernel_terms.push_back(radial_power_kernel(m, 2));
  const double inv2pi = 1.0 / (2.0 * std::numbers::pi);
  lib.kernel_terms.push_back(cutoff_kernel(
      "k:[log|x|]_d", [inv2pi](double r) { return inv2pi / r; }, delta));
  lib.kernel_terms.push_back(cutoff_kernel(
      "k:[|x|^1/2]_d", [](double r) { return 0.5 / std::sqrt(r); }, delta));
  lib.kernel_terms.push_back(cutoff_kernel(
      "k:[|x|(log|x|-1)]_d", [](double r) { return std::log(r); }, delta));
  // gradients of monomial potentials x1^m x2^n with 1 <= m + n <= 6
  for (int m = 0; m <= 6; ++m) {
    for (int n = (m == 0 ? 1 : 0); m + n <= 6; ++n) {
      DriftTerm t;
      t.descriptor = "v:grad(x1^" + std::to_string(m) + " x2^" + std::to_string(n) + ")";
      t.velocity = [m, n](const VecD& x) -> VecD {
        const double gx = m == 0 ? 0.0 : m * std::pow(x[0], m - 1) * std::pow(x[1], n);
        const double gy = n == 0 ? 0.0 : n * std::pow(x[0], m) * std::pow(x[1], n - 1);
        return {gx, gy};
      };
      lib.drift_terms.push_back(std::move(t));
    }
  }
  // diagonal diffusion candidates x1^m x2^n e_i e_i^T, (m, n) in {0, 1, 2}^2
  for (int axis = 0; axis < 2; ++axis) {
    for (int m = 0; m <= 2; ++m) {
      for (int n = 0; n <= 2; ++n) {
        SigmaTerm t;
        t.descriptor = "s:x1^" + std::to_string(m) + " x2^" + std::to_string(n) + "@" +
                       (axis == 0 ? "xx" : "yy");
        t.entries.push_back(
            {axis, axis, [m, n](const VecD& x) { return std::pow(x[0], m) * std::pow(x[1], n); }});
        lib.sigma_terms.push_back(std::move(t));
      }
    }
  }
  return lib;
}

}  // namespace detail

// Builds the trial dictionary for a model preset.  Column counts: qanr1d 24
// (7 kernel, 8 drift, 9 sigma), cos2d 85 (7, 42, 36), log2d 53 (8, 27, 18).
inline TrialLibrary build_library(const std::string& preset, double cutoff_delta = 0.01) {
  if (preset == "qanr1d") return detail::build_qanr1d();
  if (preset == "cos2d") return detail::build_cos2d();
  if (preset == "log2d") return detail::build_log2d(cutoff_delta);
  throw std::invalid_argument("build_library: unknown preset '" + preset + "'");
}

// Kernel gradient components sampled on the center-difference offset lattice
// (2 n_a - 1 offsets per axis, spacing h).  The zero offset is defined as 0
// (the integrand pairs each particle against the others, never itself);
// singular values anywhere else are an error.
struct KernelTables {
  int dim = 1;
  std::array<int, 2> tn{1, 1};
  std::vector<std::vector<double>> comp;  // one table per gradient component
};

inline KernelTables tabulate_kernel(const KernelTerm& term, const Grid& grid) {
  KernelTables kt;
  kt.dim = grid.dim;
  kt.tn[0] = 2 * grid.n[0] - 1;
  kt.tn[1] = grid.dim == 2 ? 2 * grid.n[1] - 1 : 1;
  const std::size_t count = static_cast<std::size_t>(kt.tn[0]) * kt.tn[1];
  kt.comp.assign(grid.dim, std::vector<double>(count, 0.0));
  for (int i0 = 0; i0 < kt.tn[0]; ++i0) {
    for (int i1 = 0; i1 < kt.tn[1]; ++i1) {
      const bool zero_offset = i0 == grid.n[0] - 1 && (grid.dim == 1 || i1 == grid.n[1] - 1);
      if (zero_offset) continue;
      VecD x{(i0 - (grid.n[0] - 1)) * grid.h, 0.0};
      if (grid.dim == 2) x[1] = (i1 - (grid.n[1] - 1)) * grid.h;
      const VecD g = term.grad(x);
      for (int a = 0; a < grid.dim; ++a) {
        if (!std::isfinite(g[a])) {
          throw std::runtime_error("tabulate_kernel: '" + term.descriptor +
                                   "' is singular on the offset lattice; use a "
                                   "cutoff-regularized profile");
        }
        kt.comp[a][static_cast<std::size_t>(i0) * kt.tn[1] + i1] = g[a];
      }
    }
  }
  return kt;
}

// Separable compression of a kernel table.  1D tables are kept dense; 2D
// tables are factored by SVD, keeping the smallest rank whose discarded
// singular values stay below tol in relative Frobenius norm.
struct LowRankKernel {
  int dim = 1;
  std::array<int, 2> tn{1, 1};
  double tol = 0.0;
  std::vector<double> dense;    // 1D path
  std::vector<double> weights;  // 2D path: sum_q w_q left_q outer right_q
  std::vector<std::vector<double>> left;
  std::vector<std::vector<double>> right;

  int rank() const { return dim == 1 ? 1 : static_cast<int>(weights.size()); }
};

inline LowRankKernel low_rank(const std::vector<double>& table, const Grid& grid,
                              double tol = 1e-8) {
  LowRankKernel k;
  k.dim = grid.dim;
  k.tn[0] = 2 * grid.n[0] - 1;
  k.tn[1] = grid.dim == 2 ? 2 * grid.n[1] - 1 : 1;
  k.tol = tol;
  if (table.size() != static_cast<std::size_t>(k.tn[0]) * k.tn[1]) {
    throw std::invalid_argument("low_rank: table size mismatch");
  }
  if (grid.dim == 1) {
    k.dense = table;
    return k;
  }
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      mat(table.data(), k.tn[0], k.tn[1]);
  // Jacobi rather than divide-and-conquer: polynomial profiles give exactly
  // rank-deficient tables, where BDCSVD's deflation can emit NaN singular
  // vectors for unlucky bin widths.  The tables are small, so the extra cost
  // is negligible.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(mat, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double total = sv.squaredNorm();
  if (total == 0.0) return k;  // zero kernel: rank 0
  int keep = static_cast<int>(sv.size());
  double tail = 0.0;
  for (int i = static_cast<int>(sv.size()) - 1; i >= 1; --i) {
    const double t2 = tail + sv[i] * sv[i];
    if (t2 > tol * tol * total) break;
    tail = t2;
    keep = i;
  }
  for (int q = 0; q < keep; ++q) {
    k.weights.push_back(sv[q]);
    const Eigen::VectorXd u = svd.matrixU().col(q);
    const Eigen::VectorXd v = svd.matrixV().col(q);
    k.left.emplace_back(u.data(), u.data() + u.size());
    k.right.emplace_back(v.data(), v.data() + v.size());
  }
  return k;
}

// Reconstructs the dense table a LowRankKernel represents (test oracle and
// dense-path convolutions).
inline std::vector<double> dense_table(const LowRankKernel& k) {
  if (k.dim == 1) return k.dense;
  std::vector<double> table(static_cast<std::size_t>(k.tn[0]) * k.tn[1], 0.0);
  for (std::size_t q = 0; q < k.weights.size(); ++q) {
    for (int i = 0; i < k.tn[0]; ++i) {
      const double wl = k.weights[q] * k.left[q][i];
      double* row = table.data() + static_cast<std::size_t>(i) * k.tn[1];
      for (int j = 0; j < k.tn[1]; ++j) row[j] += wl * k.right[q][j];
    }
  }
  return table;
}

// Fourier transform of a compressed kernel on an engine bound to the same grid.
inline Spectrum kernel_spectrum(ConvolutionEngine& engine, const LowRankKernel& k) {
  if (k.dim != engine.grid().dim) {
    throw std::invalid_argument("kernel_spectrum: dimension mismatch");
  }
  if (k.dim == 1) return engine.transform_dense(k.dense);
  if (k.weights.empty()) return Spectrum(engine.spectrum_size(), {0.0, 0.0});
  return engine.transform_separable(k.weights, k.left, k.right);
}

// One-shot convolution helper: (K * u)(c) = h^d sum_{c'} K(c - c') u(c').
inline std::vector<double> convolve(const LowRankKernel& kernel, std::span<const double> u,
                                    const Grid& grid) {
  ConvolutionEngine engine(grid);
  const Spectrum spec = kernel_spectrum(engine, kernel);
  engine.set_slice(u);
  return engine.apply(spec);
}

}  // namespace wsindy
