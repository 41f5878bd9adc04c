#pragma once

#include <array>
#include <cstdint>

namespace wsindy {

// Spatial dimension is 1 or 2 throughout; fixed-capacity value types avoid
// heap traffic in per-particle inner loops.  Entries past `dim` stay zero.
inline constexpr int kMaxDim = 2;

using VecD = std::array<double, kMaxDim>;            // point / vector in R^d
using MatD = std::array<double, kMaxDim * kMaxDim>;  // row-major d x d matrix

inline VecD make_vec(double x, double y = 0.0) { return {x, y}; }

inline MatD zero_mat() { return {0.0, 0.0, 0.0, 0.0}; }

// y = A x restricted to the leading dim x dim block.
inline VecD mat_vec(const MatD& a, const VecD& x, int dim) {
  VecD y{0.0, 0.0};
  for (int r = 0; r < dim; ++r) {
    double s = 0.0;
    for (int c = 0; c < dim; ++c) s += a[r * kMaxDim + c] * x[c];
    y[r] = s;
  }
  return y;
}

// A A^T restricted to the leading dim x dim block.
inline MatD mat_mat_t(const MatD& a, int dim) {
  MatD out = zero_mat();
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) {
      double s = 0.0;
      for (int k = 0; k < dim; ++k) s += a[r * kMaxDim + k] * a[c * kMaxDim + k];
      out[r * kMaxDim + c] = s;
    }
  return out;
}

}  // namespace wsindy
