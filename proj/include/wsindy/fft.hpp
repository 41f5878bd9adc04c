#pragma once

#include <fftw3.h>

#include <complex>
#include <cstring>
#include <span>
#include <stdexcept>
#include <vector>

#include "wsindy/grid.hpp"

namespace wsindy {

// Smallest 5-smooth integer >= n (FFT-friendly transform length).
inline int next_fast_size(int n) {
  for (int m = n;; ++m) {
    int r = m;
    for (int f : {2, 3, 5}) {
      while (r % f == 0) r /= f;
    }
    if (r == 1) return m;
  }
}

using Spectrum = std::vector<std::complex<double>>;

// Linear convolution of grid fields with kernels tabulated on the
// center-difference lattice (2 n_a - 1 offsets per axis, spacing h):
//
//   out(c) = h^d * sum_{c'} T(c - c') U(c'),   c in C.
//
// Both operands are zero-padded to >= 3 n_a - 2 samples per axis so the
// circular FFT product reproduces the linear convolution exactly; the central
// n_a outputs per axis are returned.  Plans use FFTW_ESTIMATE (deterministic)
// and the engine owns its buffers, so instances are stateful and not
// thread-safe; use one engine per thread.
class ConvolutionEngine {
 public:
  explicit ConvolutionEngine(const Grid& grid) : grid_(grid) {
    if (grid.dim < 1 || grid.dim > 2) {
      throw std::invalid_argument("ConvolutionEngine: dim must be 1 or 2");
    }
    for (int a = 0; a < grid.dim; ++a) {
      if (grid.n[a] < 2) throw std::invalid_argument("ConvolutionEngine: grid too small");
    }
    p_[0] = next_fast_size(3 * grid.n[0] - 2);
    p_[1] = grid.dim == 2 ? next_fast_size(3 * grid.n[1] - 2) : 1;
    spec_cols_ = (grid.dim == 2 ? p_[1] : p_[0]) / 2 + 1;
    spec_rows_ = grid.dim == 2 ? p_[0] : 1;
    real_ = fftw_alloc_real(static_cast<std::size_t>(p_[0]) * p_[1]);
    cplx_ = fftw_alloc_complex(static_cast<std::size_t>(spec_rows_) * spec_cols_);
    if (grid.dim == 1) {
      fwd_ = fftw_plan_dft_r2c_1d(p_[0], real_, cplx_, FFTW_ESTIMATE);
      inv_ = fftw_plan_dft_c2r_1d(p_[0], cplx_, real_, FFTW_ESTIMATE);
    } else {
      fwd_ = fftw_plan_dft_r2c_2d(p_[0], p_[1], real_, cplx_, FFTW_ESTIMATE);
      inv_ = fftw_plan_dft_c2r_2d(p_[0], p_[1], cplx_, real_, FFTW_ESTIMATE);
    }
    if (!fwd_ || !inv_) throw std::runtime_error("ConvolutionEngine: FFTW plan failed");
  }

  ~ConvolutionEngine() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(real_);
    fftw_free(cplx_);
  }

  ConvolutionEngine(const ConvolutionEngine&) = delete;
  ConvolutionEngine& operator=(const ConvolutionEngine&) = delete;

  const Grid& grid() const { return grid_; }

  std::size_t spectrum_size() const {
    return static_cast<std::size_t>(spec_rows_) * spec_cols_;
  }

  // Spectrum of a dense kernel table (row-major, 2 n_a - 1 samples per axis).
  Spectrum transform_dense(const std::vector<double>& table) {
    const int t0 = 2 * grid_.n[0] - 1;
    const int t1 = grid_.dim == 2 ? 2 * grid_.n[1] - 1 : 1;
    if (table.size() != static_cast<std::size_t>(t0) * t1) {
      throw std::invalid_argument("transform_dense: table size mismatch");
    }
    zero_real();
    for (int i = 0; i < t0; ++i) {
      std::memcpy(real_ + static_cast<std::size_t>(i) * p_[1], table.data() +
                      static_cast<std::size_t>(i) * t1,
                  static_cast<std::size_t>(t1) * sizeof(double));
    }
    fftw_execute(fwd_);
    return read_spectrum();
  }

  // Spectrum of sum_q w_q (left_q outer right_q) built from one-dimensional
  // transforms of the factors (2D grids only).  left_q has 2 n_0 - 1 samples,
  // right_q has 2 n_1 - 1.
  Spectrum transform_separable(const std::vector<double>& weights,
                               const std::vector<std::vector<double>>& left,
                               const std::vector<std::vector<double>>& right) {
    if (grid_.dim != 2) {
      throw std::invalid_argument("transform_separable: 2D grids only");
    }
    if (weights.size() != left.size() || weights.size() != right.size()) {
      throw std::invalid_argument("transform_separable: factor count mismatch");
    }
    Spectrum spec(spectrum_size(), {0.0, 0.0});
    std::vector<std::complex<double>> a_full(p_[0]);
    for (std::size_t q = 0; q < weights.size(); ++q) {
      const Spectrum a_half = transform_1d(left[q], p_[0], 2 * grid_.n[0] - 1);
      const Spectrum b_half = transform_1d(right[q], p_[1], 2 * grid_.n[1] - 1);
      // Real input: recover the full first-axis spectrum by conjugate symmetry.
      for (int k = 0; k < p_[0]; ++k) {
        a_full[k] = (k <= p_[0] / 2) ? a_half[k] : std::conj(a_half[p_[0] - k]);
      }
      for (int k0 = 0; k0 < p_[0]; ++k0) {
        const std::complex<double> wa = weights[q] * a_full[k0];
        std::complex<double>* row = spec.data() + static_cast<std::size_t>(k0) * spec_cols_;
        for (int k1 = 0; k1 < spec_cols_; ++k1) row[k1] += wa * b_half[k1];
      }
    }
    return spec;
  }

  // Loads (and transforms) the density slice all subsequent apply() calls act on.
  void set_slice(std::span<const double> u) {
    if (u.size() != static_cast<std::size_t>(grid_.cells())) {
      throw std::invalid_argument("set_slice: field size mismatch");
    }
    zero_real();
    const int n1 = grid_.dim == 2 ? grid_.n[1] : 1;
    const int rows = grid_.dim == 2 ? grid_.n[0] : 1;
    const int row_len = grid_.dim == 2 ? n1 : grid_.n[0];
    for (int i = 0; i < rows; ++i) {
      std::memcpy(real_ + static_cast<std::size_t>(i) * p_[1],
                  u.data() + static_cast<std::size_t>(i) * row_len,
                  static_cast<std::size_t>(row_len) * sizeof(double));
    }
    fftw_execute(fwd_);
    u_spec_ = read_spectrum();
  }

  // h^d-weighted linear convolution of the loaded slice with a kernel spectrum,
  // restricted to the grid centers.
  std::vector<double> apply(const Spectrum& kernel_spec) {
    if (u_spec_.empty()) throw std::logic_error("apply: set_slice has not been called");
    if (kernel_spec.size() != spectrum_size()) {
      throw std::invalid_argument("apply: spectrum size mismatch");
    }
    for (std::size_t i = 0; i < kernel_spec.size(); ++i) {
      const std::complex<double> prod = u_spec_[i] * kernel_spec[i];
      cplx_[i][0] = prod.real();
      cplx_[i][1] = prod.imag();
    }
    fftw_execute(inv_);
    const double scale =
        grid_.cell_volume() / (static_cast<double>(p_[0]) * (grid_.dim == 2 ? p_[1] : 1));
    std::vector<double> out(grid_.cells());
    if (grid_.dim == 1) {
      const int off = grid_.n[0] - 1;
      for (int k = 0; k < grid_.n[0]; ++k) out[k] = real_[off + k] * scale;
    } else {
      for (int k0 = 0; k0 < grid_.n[0]; ++k0) {
        const double* src = real_ + (static_cast<std::size_t>(k0 + grid_.n[0] - 1)) * p_[1] +
                            (grid_.n[1] - 1);
        double* dst = out.data() + static_cast<std::size_t>(k0) * grid_.n[1];
        for (int k1 = 0; k1 < grid_.n[1]; ++k1) dst[k1] = src[k1] * scale;
      }
    }
    return out;
  }

 private:
  void zero_real() {
    std::memset(real_, 0,
                static_cast<std::size_t>(p_[0]) * p_[1] * sizeof(double));
  }

  Spectrum read_spectrum() const {
    Spectrum spec(spectrum_size());
    for (std::size_t i = 0; i < spec.size(); ++i) {
      spec[i] = {cplx_[i][0], cplx_[i][1]};
    }
    return spec;
  }

  // 1D r2c transform of a zero-padded factor (scratch plans; called once per
  // kernel, not in the per-slice hot path).
  static Spectrum transform_1d(const std::vector<double>& data, int padded, int expect) {
    if (data.size() != static_cast<std::size_t>(expect)) {
      throw std::invalid_argument("transform_1d: factor length mismatch");
    }
    double* in = fftw_alloc_real(padded);
    fftw_complex* out = fftw_alloc_complex(padded / 2 + 1);
    fftw_plan plan = fftw_plan_dft_r2c_1d(padded, in, out, FFTW_ESTIMATE);
    std::memset(in, 0, static_cast<std::size_t>(padded) * sizeof(double));
    std::memcpy(in, data.data(), data.size() * sizeof(double));
    fftw_execute(plan);
    Spectrum spec(padded / 2 + 1);
    for (std::size_t i = 0; i < spec.size(); ++i) spec[i] = {out[i][0], out[i][1]};
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
    return spec;
  }

  Grid grid_;
  std::array<int, 2> p_{1, 1};  // padded transform lengths
  int spec_rows_ = 1;
  int spec_cols_ = 1;
  double* real_ = nullptr;
  fftw_complex* cplx_ = nullptr;
  fftw_plan fwd_ = nullptr;
  fftw_plan inv_ = nullptr;
  Spectrum u_spec_;
};

}  // namespace wsindy
