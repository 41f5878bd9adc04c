#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "wsindy/fft.hpp"
#include "wsindy/grid.hpp"
#include "wsindy/library.hpp"
#include "wsindy/test_functions.hpp"

namespace wsindy {

// Weak-form linear system G w = b.  Row k tests the density evolution against
// one translated test function; columns follow the library order.  With
// Q(t, x) = sum over cells and times of the quadrature weights,
//
//   b_k      = < d/dt psi_k, U >,
//   kernel:  G_kj = < grad psi_k, (grad K_j * U) U >,
//   drift:   G_kj = < grad psi_k . f_j, U >,
//   sigma:   G_kj = -1/2 sum_pq < d2/dx_p dx_q psi_k, (A_j)_pq U >,
//
// so for the density equation
//   d/dt mu = div((grad K * mu + grad V) mu) + 1/2 sum_pq d2_pq((s s^T)_pq mu)
// the true coefficient vector satisfies G w = b up to discretization noise,
// with positive sigma-block coefficients for physical diffusion.
struct WeakSystem {
  Eigen::MatrixXd G;
  Eigen::VectorXd b;
  std::vector<std::string> column_descriptors;
  std::vector<char> column_blocks;
  struct Row {
    int space = 0;  // flat index into the spatial query lattice (row-major)
    int time = 0;   // index into the temporal query list
  };
  std::vector<Row> rows;
  std::vector<std::string> notes;  // kernel compression ranks and similar
};

namespace detail {

// out[b] = sum_o tab[o] W[q[b] - m + o] for each query index (1D stencil
// correlation; queries are guaranteed admissible by construction).
inline void reduce_1d(const double* W, const std::vector<double>& tab, int m,
                      const std::vector<int>& q, double* out) {
  for (std::size_t b = 0; b < q.size(); ++b) {
    const double* w = W + (q[b] - m);
    double s = 0.0;
    for (int o = 0; o <= 2 * m; ++o) s += tab[o] * w[o];
    out[b] = s;
  }
}

// Separable 2D stencil correlation: axis 1 first into scratch T(i0, b1), then
// axis 0 into out(b0, b1).
inline void reduce_2d(const double* W, int n0, int n1, const std::vector<double>& tab0,
                      const std::vector<double>& tab1, int m, const std::vector<int>& q0,
                      const std::vector<int>& q1, std::vector<double>& scratch,
                      double* out) {
  const int b1n = static_cast<int>(q1.size());
  scratch.resize(static_cast<std::size_t>(n0) * b1n);
  for (int i0 = 0; i0 < n0; ++i0) {
    const double* row = W + static_cast<std::size_t>(i0) * n1;
    double* trow = scratch.data() + static_cast<std::size_t>(i0) * b1n;
    for (int b1 = 0; b1 < b1n; ++b1) {
      const double* w = row + (q1[b1] - m);
      double s = 0.0;
      for (int o = 0; o <= 2 * m; ++o) s += tab1[o] * w[o];
      trow[b1] = s;
    }
  }
  for (std::size_t b0 = 0; b0 < q0.size(); ++b0) {
    const double* tbase = scratch.data() + static_cast<std::size_t>(q0[b0] - m) * b1n;
    double* orow = out + b0 * b1n;
    for (int b1 = 0; b1 < b1n; ++b1) {
      const double* t = tbase + b1;
      double s = 0.0;
      for (int o = 0; o <= 2 * m; ++o) s += tab0[o] * t[static_cast<std::size_t>(o) * b1n];
      orow[b1] = s;
    }
  }
}

}  // namespace detail

inline WeakSystem assemble(const HistogramField& U, const TrialLibrary& lib,
                           const TestBasis& basis) {
  const Grid& grid = U.grid;
  if (lib.dim != grid.dim) throw std::invalid_argument("assemble: library dimension mismatch");
  if (!basis.grid.same_geometry(grid)) {
    throw std::invalid_argument("assemble: basis grid does not match the density grid");
  }
  if (basis.times.size() != U.times.size()) {
    throw std::invalid_argument("assemble: basis time axis does not match the density field");
  }
  for (std::size_t l = 0; l < U.times.size(); ++l) {
    if (std::abs(basis.times[l] - U.times[l]) > 1e-9 * std::max(1.0, std::abs(U.times[l]))) {
      throw std::invalid_argument("assemble: basis time axis does not match the density field");
    }
  }
  const int L = static_cast<int>(U.times.size());
  const int cells = grid.cells();
  const int J = lib.size();
  if (J == 0) throw std::invalid_argument("assemble: empty library");

  const std::vector<int>& q0 = basis.queries.space[0];
  const std::vector<int> empty_axis;
  const std::vector<int>& q1 = grid.dim == 2 ? basis.queries.space[1] : empty_axis;
  const std::vector<int>& qt = basis.queries.time;
  const int n_space = basis.queries.n_space();
  const int n_time = static_cast<int>(qt.size());
  const int n_rows = n_space * n_time;
  const int mx = basis.phi_x.m;
  const int mt = basis.phi_t.m;
  const double hd = grid.cell_volume();

  WeakSystem sys;
  sys.G = Eigen::MatrixXd::Zero(n_rows, J);
  sys.b = Eigen::VectorXd::Zero(n_rows);
  sys.column_descriptors = lib.descriptors();
  sys.column_blocks.resize(J);
  for (int j = 0; j < J; ++j) sys.column_blocks[j] = lib.block_of(j);
  sys.rows.resize(n_rows);
  for (int s = 0; s < n_space; ++s) {
    for (int ti = 0; ti < n_time; ++ti) sys.rows[s * n_time + ti] = {s, ti};
  }

  // trapezoid weights on the uniform time axis
  std::vector<double> wt(L, basis.dt);
  wt.front() *= 0.5;
  wt.back() *= 0.5;

  // Precompute kernel spectra (one per gradient component) and pointwise
  // tables for drift and diffusion candidates.
  ConvolutionEngine engine(grid);
  std::vector<std::vector<Spectrum>> kernel_specs(lib.kernel_terms.size());
  for (std::size_t j = 0; j < lib.kernel_terms.size(); ++j) {
    const KernelTables tables = tabulate_kernel(lib.kernel_terms[j], grid);
    std::string note = "kernel " + lib.kernel_terms[j].descriptor + " rank";
    for (int a = 0; a < grid.dim; ++a) {
      const LowRankKernel lr = low_rank(tables.comp[a], grid);
      note += " " + std::to_string(lr.rank());
      kernel_specs[j].push_back(kernel_spectrum(engine, lr));
    }
    if (grid.dim == 2) sys.notes.push_back(note);
  }

  std::vector<VecD> centers(cells);
  for (int c = 0; c < cells; ++c) {
    const int n1 = grid.dim == 2 ? grid.n[1] : 1;
    centers[c][0] = grid.center(0, grid.dim == 2 ? c / n1 : c);
    centers[c][1] = grid.dim == 2 ? grid.center(1, c % n1) : 0.0;
  }
  // active (axis, values) pairs per drift term
  std::vector<std::vector<std::pair<int, std::vector<double>>>> drift_tabs(
      lib.drift_terms.size());
  for (std::size_t j = 0; j < lib.drift_terms.size(); ++j) {
    for (int a = 0; a < grid.dim; ++a) {
      std::vector<double> vals(cells);
      double amax = 0.0;
      for (int c = 0; c < cells; ++c) {
        vals[c] = lib.drift_terms[j].velocity(centers[c])[a];
        amax = std::max(amax, std::abs(vals[c]));
      }
      if (amax > 0.0) drift_tabs[j].emplace_back(a, std::move(vals));
    }
  }
  // (p, q, values) entries per sigma term
  std::vector<std::vector<std::tuple<int, int, std::vector<double>>>> sigma_tabs(
      lib.sigma_terms.size());
  for (std::size_t j = 0; j < lib.sigma_terms.size(); ++j) {
    for (const SigmaTerm::Entry& e : lib.sigma_terms[j].entries) {
      if (e.p < 0 || e.p >= grid.dim || e.q < 0 || e.q >= grid.dim) {
        throw std::invalid_argument("assemble: sigma entry index out of range in " +
                                    lib.sigma_terms[j].descriptor);
      }
      std::vector<double> vals(cells);
      for (int c = 0; c < cells; ++c) vals[c] = e.value(centers[c]);
      sigma_tabs[j].emplace_back(e.p, e.q, std::move(vals));
    }
  }

  const std::vector<double>& xv = basis.phi_x.val;
  const std::vector<double>& xd1 = basis.phi_x.d1;
  const std::vector<double>& xd2 = basis.phi_x.d2;

  std::vector<double> W(cells), SR(n_space), tmp(n_space), scratch;

  // pattern: derivative order per axis (1D uses order0 only)
  auto reduce = [&](const std::vector<double>& field, int order0, int order1, double* out) {
    if (grid.dim == 1) {
      const std::vector<double>& tab = order0 == 0 ? xv : (order0 == 1 ? xd1 : xd2);
      detail::reduce_1d(field.data(), tab, mx, q0, out);
    } else {
      const std::vector<double>& tab0 = order0 == 0 ? xv : (order0 == 1 ? xd1 : xd2);
      const std::vector<double>& tab1 = order1 == 0 ? xv : (order1 == 1 ? xd1 : xd2);
      detail::reduce_2d(field.data(), grid.n[0], grid.n[1], tab0, tab1, mx, q0, q1,
                        scratch, out);
    }
  };

  auto scatter = [&](const std::vector<double>& sr, int l, bool time_deriv, int col) {
    const std::vector<double>& ttab = time_deriv ? basis.phi_t.d1 : basis.phi_t.val;
    for (int ti = 0; ti < n_time; ++ti) {
      const int o = l - qt[ti];
      if (o < -mt || o > mt) continue;
      const double f = wt[l] * hd * ttab[o + mt];
      if (col >= 0) {
        for (int s = 0; s < n_space; ++s) sys.G(s * n_time + ti, col) += f * sr[s];
      } else {
        for (int s = 0; s < n_space; ++s) sys.b(s * n_time + ti) += f * sr[s];
      }
    }
  };

  for (int l = 0; l < L; ++l) {
    const std::span<const double> u = U.slice(l);
    engine.set_slice(u);

    // time-derivative column (right-hand side)
    std::copy(u.begin(), u.end(), W.begin());
    reduce(W, 0, 0, SR.data());
    scatter(SR, l, true, -1);

    for (std::size_t j = 0; j < lib.kernel_terms.size(); ++j) {
      std::fill(SR.begin(), SR.end(), 0.0);
      for (int a = 0; a < grid.dim; ++a) {
        const std::vector<double> conv = engine.apply(kernel_specs[j][a]);
        for (int c = 0; c < cells; ++c) W[c] = conv[c] * u[c];
        reduce(W, a == 0 ? 1 : 0, a == 1 ? 1 : 0, tmp.data());
        for (int s = 0; s < n_space; ++s) SR[s] += tmp[s];
      }
      scatter(SR, l, false, lib.kernel_offset() + static_cast<int>(j));
    }

    for (std::size_t j = 0; j < lib.drift_terms.size(); ++j) {
      std::fill(SR.begin(), SR.end(), 0.0);
      for (const auto& [a, vals] : drift_tabs[j]) {
        for (int c = 0; c < cells; ++c) W[c] = vals[c] * u[c];
        reduce(W, a == 0 ? 1 : 0, a == 1 ? 1 : 0, tmp.data());
        for (int s = 0; s < n_space; ++s) SR[s] += tmp[s];
      }
      scatter(SR, l, false, lib.drift_offset() + static_cast<int>(j));
    }

    for (std::size_t j = 0; j < lib.sigma_terms.size(); ++j) {
      std::fill(SR.begin(), SR.end(), 0.0);
      for (const auto& [p, q, vals] : sigma_tabs[j]) {
        for (int c = 0; c < cells; ++c) W[c] = vals[c] * u[c];
        int o0 = 0;
        int o1 = 0;
        if (p == q) {
          (p == 0 ? o0 : o1) = 2;
        } else {
          o0 = 1;
          o1 = 1;
        }
        if (grid.dim == 1) o0 = 2;
        reduce(W, o0, o1, tmp.data());
        for (int s = 0; s < n_space; ++s) SR[s] += tmp[s];
      }
      for (int s = 0; s < n_space; ++s) SR[s] *= -0.5;
      scatter(SR, l, false, lib.sigma_offset() + static_cast<int>(j));
    }
  }

  return sys;
}

// Singular-value summary of the regression matrix.  kappa is infinite when the
// matrix is numerically rank deficient.
struct ConditionReport {
  double sigma_max = 0.0;
  double sigma_min = 0.0;
  double kappa = std::numeric_limits<double>::infinity();
  int rank = 0;
};

inline ConditionReport condition_report(const Eigen::MatrixXd& G) {
  ConditionReport rep;
  if (G.size() == 0) return rep;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(G);
  const Eigen::VectorXd& sv = svd.singularValues();
  rep.sigma_max = sv.size() > 0 ? sv[0] : 0.0;
  rep.sigma_min = sv.size() > 0 ? sv[sv.size() - 1] : 0.0;
  const double thresh = std::max(G.rows(), G.cols()) *
                        std::numeric_limits<double>::epsilon() * rep.sigma_max;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > thresh) ++rep.rank;
  }
  if (rep.sigma_min > 0.0 && std::isfinite(rep.sigma_max / rep.sigma_min)) {
    rep.kappa = rep.sigma_max / rep.sigma_min;
  }
  return rep;
}

// Binary dump of an assembled system (debugging aid).  Layout: magic, row and
// column counts, b, G (column-major), then per column a block tag and
// length-prefixed descriptor, then per row its space and time indices.
inline void dump_system(const WeakSystem& sys, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("dump_system: cannot open " + path);
  const char magic[8] = {'W', 'S', 'S', 'Y', 'S', '1', 0, 0};
  out.write(magic, 8);
  const std::uint64_t nr = sys.G.rows(), nc = sys.G.cols();
  out.write(reinterpret_cast<const char*>(&nr), 8);
  out.write(reinterpret_cast<const char*>(&nc), 8);
  out.write(reinterpret_cast<const char*>(sys.b.data()),
            static_cast<std::streamsize>(nr * sizeof(double)));
  out.write(reinterpret_cast<const char*>(sys.G.data()),
            static_cast<std::streamsize>(nr * nc * sizeof(double)));
  for (std::uint64_t j = 0; j < nc; ++j) {
    out.put(sys.column_blocks[j]);
    const std::uint64_t len = sys.column_descriptors[j].size();
    out.write(reinterpret_cast<const char*>(&len), 8);
    out.write(sys.column_descriptors[j].data(), static_cast<std::streamsize>(len));
  }
  for (const WeakSystem::Row& r : sys.rows) {
    const std::int32_t st[2] = {r.space, r.time};
    out.write(reinterpret_cast<const char*>(st), 8);
  }
  if (!out) throw std::runtime_error("dump_system: write failed for " + path);
}

inline WeakSystem load_system(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_system: cannot open " + path);
  char magic[8] = {};
  in.read(magic, 8);
  const char want[8] = {'W', 'S', 'S', 'Y', 'S', '1', 0, 0};
  if (!in || !std::equal(magic, magic + 8, want)) {
    throw std::runtime_error("load_system: bad header in " + path);
  }
  std::uint64_t nr = 0, nc = 0;
  in.read(reinterpret_cast<char*>(&nr), 8);
  in.read(reinterpret_cast<char*>(&nc), 8);
  WeakSystem sys;
  sys.b.resize(static_cast<Eigen::Index>(nr));
  sys.G.resize(static_cast<Eigen::Index>(nr), static_cast<Eigen::Index>(nc));
  in.read(reinterpret_cast<char*>(sys.b.data()),
          static_cast<std::streamsize>(nr * sizeof(double)));
  in.read(reinterpret_cast<char*>(sys.G.data()),
          static_cast<std::streamsize>(nr * nc * sizeof(double)));
  for (std::uint64_t j = 0; j < nc && in; ++j) {
    sys.column_blocks.push_back(static_cast<char>(in.get()));
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 8);
    if (!in || len > (1u << 20)) throw std::runtime_error("load_system: bad column record");
    std::string desc(len, '\0');
    in.read(desc.data(), static_cast<std::streamsize>(len));
    sys.column_descriptors.push_back(std::move(desc));
  }
  sys.rows.resize(nr);
  for (std::uint64_t r = 0; r < nr && in; ++r) {
    std::int32_t st[2];
    in.read(reinterpret_cast<char*>(st), 8);
    sys.rows[r] = {st[0], st[1]};
  }
  if (!in) throw std::runtime_error("load_system: truncated file " + path);
  return sys;
}

}  // namespace wsindy
